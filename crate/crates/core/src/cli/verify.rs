//! The acceptance table run by `seqchsh verify`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    certify_with_engine, double_violation_region, max_chsh3_under_double_violation,
    pairwise_constraints, pairwise_regions, triple_boundary_point, uniform_grid, violation_onset,
};
use crate::error::Result;
use crate::mc::estimate_chsh;
use crate::povm::{
    effect, luders_nonselective, pointer_model_update, quality_of, UnsharpMeasurement,
};
use crate::qops::{BlochDirection, DensityMatrix4, Operator2, Outcome, Wing};
use crate::scenario::{
    chsh_all, chsh_value, closed_form_chsh, default_config, AveragedChain, ScenarioConfig,
    TSIRELSON,
};

/// Published window endpoints, to five decimals.
#[allow(clippy::approx_constant)]
const WINDOW_LO: f64 = 0.70711;
const WINDOW_HI: f64 = 0.91018;

/// One row of the acceptance table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub id: &'static str,
    pub claim: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn row(id: &'static str, claim: impl Into<String>, measured: f64, target: f64, tolerance: f64, pass: bool) -> CheckRow {
    CheckRow {
        id,
        claim: claim.into(),
        measured,
        target,
        tolerance,
        pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Monte Carlo seeds per configuration.
    pub mc_seeds: u64,
    pub mc_shots: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            mc_seeds: 100,
            mc_shots: 1_000_000,
        }
    }
}

impl VerifyOptions {
    pub fn quick() -> Self {
        Self {
            mc_seeds: 3,
            mc_shots: 200_000,
        }
    }
}

/// Configurations used by the Monte Carlo consistency row.
pub fn mc_configs() -> Vec<(ScenarioConfig, usize)> {
    vec![
        (default_config(&[0.8]).expect("valid"), 1),
        (default_config(&[0.75, 0.95]).expect("valid"), 2),
        (default_config(&triple_boundary_point()).expect("valid"), 3),
    ]
}

struct Sanity {
    states: usize,
    bad_states: usize,
    measurements: usize,
    bad_effects: usize,
}

impl Sanity {
    fn new() -> Self {
        Self {
            states: 0,
            bad_states: 0,
            measurements: 0,
            bad_effects: 0,
        }
    }

    fn state(&mut self, rho: &DensityMatrix4) {
        self.states += 1;
        if rho.validate().is_err() {
            self.bad_states += 1;
        }
    }

    fn measurement(&mut self, m: &UnsharpMeasurement) {
        self.measurements += 1;
        let sum = effect(m, Outcome::Plus) + effect(m, Outcome::Minus);
        if sum.max_abs_diff(&Operator2::identity()) > 1e-12 {
            self.bad_effects += 1;
        }
    }

    fn chain(&mut self, cfg: &ScenarioConfig) -> Result<()> {
        for rho in AveragedChain::full(cfg)?.states() {
            self.state(rho);
        }
        for stage in cfg.bobs() {
            for s in 0..2 {
                self.measurement(&stage.measurement(s)?);
            }
        }
        Ok(())
    }
}

pub fn run(opts: VerifyOptions) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let mut sanity = Sanity::new();
    let mut rng = ChaCha8Rng::seed_from_u64(20_160_101);

    // AC1
    let mut worst = 0.0f64;
    for lambda in uniform_grid(10_000)? {
        let q = quality_of(lambda)?;
        worst = worst.max(q.tradeoff_defect().abs());
    }
    rows.push(row("AC1", "F^2+G^2=1 on 10^4 lambdas", worst, 0.0, 1e-14, worst <= 1e-14));

    // AC2
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rho = DensityMatrix4::random(&mut rng);
        sanity.state(&rho);
        for k in 0..20 {
            let lambda = (k as f64 + 0.5) / 20.0;
            let n = BlochDirection::random(&mut rng);
            let m = UnsharpMeasurement::new(n, lambda)?;
            sanity.measurement(&m);
            let a = luders_nonselective(&rho, Wing::Bob, &m);
            let b = pointer_model_update(&rho, Wing::Bob, &n, &quality_of(lambda)?);
            sanity.state(&a);
            sanity.state(&b);
            worst = worst.max(a.max_abs_diff(&b));
        }
    }
    rows.push(row("AC2", "pointer model = Lueders update (100 states x 20 lambdas)", worst, 0.0, 1e-12, worst <= 1e-12));

    // AC3
    let mut worst = 0.0f64;
    for i in 1..=100 {
        let lambda = i as f64 / 100.0;
        let cfg = default_config(&[lambda])?;
        sanity.chain(&cfg)?;
        let v = chsh_value(&cfg, 1)?.chsh_value;
        worst = worst.max((v - TSIRELSON * lambda).abs());
    }
    rows.push(row("AC3", "CHSH_AB1 = 2*sqrt(2)*lambda1 (100 points)", worst, 0.0, 1e-10, worst <= 1e-10));
    let v = chsh_value(&default_config(&[0.8])?, 1)?.chsh_value;
    rows.push(row("AC3", "CHSH_AB1(λ=0.8)=2.2627", v, 2.2627, 5e-5, (v - 2.2627).abs() <= 5e-5));

    // AC4
    let mut worst = 0.0f64;
    for i in 1..=30 {
        for j in 1..=30 {
            let (l1, l2) = (i as f64 / 30.0, j as f64 / 30.0);
            let cfg = default_config(&[l1, l2])?;
            sanity.chain(&cfg)?;
            let v = chsh_value(&cfg, 2)?.chsh_value;
            let want = l2 * SQRT_2 * (1.0 + (1.0 - l1 * l1).sqrt());
            worst = worst.max((v - want).abs());
        }
    }
    rows.push(row("AC4", "CHSH_AB2 = lambda2*sqrt(2)*(1+sqrt(1-lambda1^2)) (30x30)", worst, 0.0, 1e-10, worst <= 1e-10));

    // AC5
    let window = double_violation_region(0.001)?;
    let (lo, hi) = window.axis_bounds(0).unwrap_or((f64::NAN, f64::NAN));
    let step = window.resolution;
    let lo_ok = (lo - WINDOW_LO).abs() <= 0.001 && lo - step < WINDOW_LO && WINDOW_LO <= lo;
    let hi_ok = (hi - WINDOW_HI).abs() <= 0.001 && hi <= WINDOW_HI && WINDOW_HI < hi + step;
    rows.push(row("AC5", "double-violation window lower end (bracketed)", lo, WINDOW_LO, 0.001, lo_ok));
    rows.push(row("AC5", "double-violation window upper end (bracketed)", hi, WINDOW_HI, 0.001, hi_ok));

    // AC6
    let onset = violation_onset(&[FRAC_1_SQRT_2 + 1e-6], 0.001)?.unwrap_or(f64::NAN);
    rows.push(row("AC6", "Bob2 violation onset at lambda1=1/sqrt(2)+1e-6", onset, 0.8284, 0.001, (onset - 0.8284).abs() <= 0.001));

    // AC7
    let bound = max_chsh3_under_double_violation(0.005)?;
    rows.push(row(
        "AC7",
        "sup CHSH₃ = 1.8833 < 2",
        bound.supremum,
        1.8833,
        0.002,
        (bound.supremum - 1.8833).abs() <= 0.002 && bound.margin > 0.11,
    ));
    rows.push(row("AC7", "margin 2 - sup CHSH3 > 0.11", bound.margin, 0.11, 0.0, bound.margin > 0.11));

    // AC8
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=4);
        let lambdas: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
        let cfg = default_config(&lambdas)?;
        sanity.chain(&cfg)?;
        for r in chsh_all(&cfg)? {
            let c = closed_form_chsh(&lambdas, r.bob_index)?;
            worst = worst.max((r.chsh_value - c).abs());
        }
    }
    rows.push(row("AC8", "engine = closed-form recursion (500 configs, n<=4)", worst, 0.0, 1e-10, worst <= 1e-10));

    // AC9
    let needed = ((opts.mc_seeds as f64) * 0.99).ceil() as u64;
    for (cfg, bob) in mc_configs() {
        let exact = chsh_value(&cfg, bob)?.chsh_value;
        let mut within = 0;
        for seed in 0..opts.mc_seeds {
            let r = estimate_chsh(&cfg, bob, opts.mc_shots, seed)?;
            if (r.estimate - exact).abs() <= 5.0 * r.standard_error {
                within += 1;
            }
        }
        rows.push(row(
            "AC9",
            format!(
                "MC within 5 SE for lambdas {:?}, Bob {bob} ({} seeds x {} shots)",
                cfg.sharpness(),
                opts.mc_seeds,
                opts.mc_shots
            ),
            within as f64,
            needed as f64,
            0.0,
            within >= needed,
        ));
    }

    // AC10
    for (pair, report) in pairwise_regions(0.01)? {
        let ok = match &report.extremal {
            Some(witness) => {
                let cfg = default_config(&witness.lambdas)?;
                sanity.chain(&cfg)?;
                let engine: Vec<f64> = chsh_all(&cfg)?.iter().map(|r| r.chsh_value).collect();
                let single = crate::analysis::RegionReport {
                    cells: vec![witness.clone()],
                    ..report.clone()
                };
                let cert = certify_with_engine(&single, &pairwise_constraints(pair))?;
                cert.all_feasible && pairwise_constraints(pair).iter().all(|c| c.holds(&engine))
            }
            None => false,
        };
        rows.push(row(
            "AC10",
            format!("region for pair (Bob{}, Bob{}) nonempty with engine witness", pair.0, pair.1),
            report.cells.len() as f64,
            1.0,
            0.0,
            ok,
        ));
    }

    // AC11
    rows.push(row(
        "AC11",
        format!("propagated states valid ({} checked)", sanity.states),
        sanity.bad_states as f64,
        0.0,
        0.0,
        sanity.bad_states == 0,
    ));
    rows.push(row(
        "AC11",
        format!("effect completeness ({} measurements)", sanity.measurements),
        sanity.bad_effects as f64,
        0.0,
        0.0,
        sanity.bad_effects == 0,
    ));

    Ok(rows)
}
