//! Parameter-space studies over the sharpness vector.
//!
//! Sweeps evaluate the closed-form chain on a lattice `k·step` (so halving the
//! step keeps every coarser point), keep the cells that satisfy all
//! constraints, and report the cell maximizing an objective. Feasible cells
//! can then be re-checked against the density-matrix engine.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::quality_of;
use crate::scenario::{chsh_all, chsh_value, default_config, violation_threshold, TSIRELSON};

/// Local-realist CHSH bound.
pub const CLASSICAL_BOUND: f64 = 2.0;

/// One sharpness axis: the lattice points `k·step` inside `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    lo: f64,
    hi: f64,
    step: f64,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(Error::InvalidGrid("non-finite bound".into()));
        }
        if !(0.0 < lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidGrid(format!("need 0 < lo < hi <= 1, got [{lo}, {hi}]")));
        }
        if step <= 0.0 {
            return Err(Error::InvalidGrid(format!("step must be positive, got {step}")));
        }
        Ok(Self { lo, hi, step })
    }

    /// Full lattice `step, 2·step, …, 1`.
    pub fn unit(step: f64) -> Result<Self> {
        Self::new(step, 1.0, step)
    }

    /// A single pinned value.
    pub fn fixed(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::SharpnessOutOfRange(value));
        }
        Ok(Self {
            lo: value,
            hi: value,
            step: 0.0,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn points(&self) -> Vec<f64> {
        if self.step == 0.0 {
            return vec![self.lo];
        }
        let slack = 1e-9;
        let first = (self.lo / self.step - slack).ceil() as i64;
        let last = (self.hi / self.step + slack).floor() as i64;
        (first.max(1)..=last)
            .map(|k| (k as f64 * self.step).min(self.hi).max(self.lo))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Strictly above the threshold.
    Above,
    AtMost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub bob: usize,
    pub threshold: f64,
    pub comparison: Comparison,
}

impl Constraint {
    pub fn violates(bob: usize) -> Self {
        Self {
            bob,
            threshold: CLASSICAL_BOUND,
            comparison: Comparison::Above,
        }
    }

    pub fn respects(bob: usize) -> Self {
        Self {
            bob,
            threshold: CLASSICAL_BOUND,
            comparison: Comparison::AtMost,
        }
    }

    pub fn holds(&self, chsh: &[f64]) -> bool {
        let v = chsh[self.bob - 1];
        match self.comparison {
            Comparison::Above => v > self.threshold,
            Comparison::AtMost => v <= self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize one Bob's CHSH value.
    Chsh(usize),
    /// Maximize the smallest CHSH value among the listed Bobs.
    MinChsh(Vec<usize>),
}

impl Objective {
    fn eval(&self, chsh: &[f64]) -> f64 {
        match self {
            Objective::Chsh(b) => chsh[b - 1],
            Objective::MinChsh(bobs) => bobs
                .iter()
                .map(|b| chsh[b - 1])
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn bobs(&self) -> Vec<usize> {
        match self {
            Objective::Chsh(b) => vec![*b],
            Objective::MinChsh(bobs) => bobs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<GridAxis>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        let n = self.axes.len();
        if n == 0 {
            return Err(Error::EmptyChain);
        }
        let bobs = self
            .constraints
            .iter()
            .map(|c| c.bob)
            .chain(self.objective.bobs());
        for b in bobs {
            if b == 0 || b > n {
                return Err(Error::IndexOutOfRange { index: b, limit: n });
            }
        }
        if self.constraints.iter().any(|c| !c.threshold.is_finite()) {
            return Err(Error::InvalidGrid("non-finite threshold".into()));
        }
        Ok(())
    }

    /// Finest nonzero step over all axes.
    pub fn resolution(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| a.step)
            .filter(|s| *s > 0.0)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub lambdas: Vec<f64>,
    pub chsh: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub cells: Vec<Cell>,
    pub extremal: Option<Cell>,
    pub extremal_value: Option<f64>,
    pub evaluated: usize,
    pub resolution: f64,
    pub refinement_depth: u32,
}

impl RegionReport {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Smallest and largest feasible value along one axis (0-based).
    pub fn axis_bounds(&self, axis: usize) -> Option<(f64, f64)> {
        let mut it = self.cells.iter().map(|c| c.lambdas[axis]);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }
}

/// Closed-form CHSH values of every Bob in one pass.
pub fn closed_form_chain(lambdas: &[f64]) -> Vec<f64> {
    let mut prior = 1.0;
    lambdas
        .iter()
        .map(|&l| {
            let v = TSIRELSON * l * prior;
            prior *= crate::scenario::survival_factor(l);
            v
        })
        .collect()
}

fn cartesian(points: &[Vec<f64>], flat: usize) -> Vec<f64> {
    let mut rest = flat;
    let mut out = vec![0.0; points.len()];
    for (slot, axis) in out.iter_mut().zip(points).rev() {
        *slot = axis[rest % axis.len()];
        rest /= axis.len();
    }
    out
}

/// Closed-form sweep over the lattice.
pub fn sweep(spec: &SweepSpec) -> Result<RegionReport> {
    spec.validate()?;
    let points: Vec<Vec<f64>> = spec.axes.iter().map(GridAxis::points).collect();
    let total: usize = points.iter().map(Vec::len).product();
    let cells: Vec<Cell> = (0..total)
        .into_par_iter()
        .filter_map(|flat| {
            let lambdas = cartesian(&points, flat);
            let chsh = closed_form_chain(&lambdas);
            spec.constraints
                .iter()
                .all(|c| c.holds(&chsh))
                .then_some(Cell { lambdas, chsh })
        })
        .collect();
    let mut best: Option<(f64, usize)> = None;
    for (i, cell) in cells.iter().enumerate() {
        let v = spec.objective.eval(&cell.chsh);
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, i));
        }
    }
    Ok(RegionReport {
        extremal: best.map(|(_, i)| cells[i].clone()),
        extremal_value: best.map(|(v, _)| v),
        cells,
        evaluated: total,
        resolution: spec.resolution(),
        refinement_depth: 0,
    })
}

/// Outcome of re-evaluating a region through the density-matrix engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineCertificate {
    pub checked: usize,
    pub all_feasible: bool,
    pub max_deviation: f64,
}

/// Re-checks every cell of `report` against `constraints` using the engine.
pub fn certify_with_engine(
    report: &RegionReport,
    constraints: &[Constraint],
) -> Result<EngineCertificate> {
    let results: Vec<(bool, f64)> = report
        .cells
        .par_iter()
        .map(|cell| {
            let cfg = default_config(&cell.lambdas)?;
            let engine: Vec<f64> = chsh_all(&cfg)?.iter().map(|r| r.chsh_value).collect();
            let dev = engine
                .iter()
                .zip(&cell.chsh)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok((constraints.iter().all(|c| c.holds(&engine)), dev))
        })
        .collect::<Result<_>>()?;
    Ok(EngineCertificate {
        checked: results.len(),
        all_feasible: results.iter().all(|(ok, _)| *ok),
        max_deviation: results.iter().map(|(_, d)| *d).fold(0.0, f64::max),
    })
}

fn check_resolution(resolution: f64, max: f64) -> Result<()> {
    if !(resolution > 0.0 && resolution <= max) {
        return Err(Error::InvalidGrid(format!(
            "resolution {resolution} outside (0, {max}]"
        )));
    }
    Ok(())
}

/// Sweep of `λ₁` with a sharp second Bob; the feasible set of double violation
/// is the window `(1/√2, √(2(√2−1)))`.
pub fn double_violation_region(resolution: f64) -> Result<RegionReport> {
    check_resolution(resolution, 0.01)?;
    sweep(&SweepSpec {
        axes: vec![GridAxis::unit(resolution)?, GridAxis::fixed(1.0)?],
        constraints: vec![Constraint::violates(1), Constraint::violates(2)],
        objective: Objective::MinChsh(vec![1, 2]),
    })
}

/// Smallest lattice value of the next Bob's sharpness that violates CHSH
/// after the given earlier Bobs, or `None` if none does.
pub fn violation_onset(prior: &[f64], resolution: f64) -> Result<Option<f64>> {
    check_resolution(resolution, 0.01)?;
    let mut axes = prior
        .iter()
        .map(|&l| GridAxis::fixed(l))
        .collect::<Result<Vec<_>>>()?;
    axes.push(GridAxis::unit(resolution)?);
    let bob = axes.len();
    let report = sweep(&SweepSpec {
        axes,
        constraints: vec![Constraint::violates(bob)],
        objective: Objective::Chsh(bob),
    })?;
    Ok(report.axis_bounds(bob - 1).map(|(lo, _)| lo))
}

/// Analytic supremum point of the third Bob under double violation.
pub fn triple_boundary_point() -> [f64; 3] {
    [FRAC_1_SQRT_2, 2.0 / (SQRT_2 + 1.0), 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpossibilityReport {
    pub region: RegionReport,
    /// `(1/√2, 2/(√2+1), 1)`, where both constraints are saturated.
    pub boundary_point: [f64; 3],
    pub boundary_closed_form: f64,
    pub boundary_engine: f64,
    /// Engine value one grid step inside the open feasible set.
    pub inner_point: [f64; 3],
    pub inner_engine: f64,
    /// Largest of the grid maximum and the boundary value.
    pub supremum: f64,
    pub margin: f64,
}

impl ImpossibilityReport {
    pub fn triple_violation_possible(&self) -> bool {
        self.supremum > CLASSICAL_BOUND
    }
}

pub fn triple_violation_spec(resolution: f64) -> Result<SweepSpec> {
    Ok(SweepSpec {
        axes: vec![GridAxis::unit(resolution)?; 3],
        constraints: vec![Constraint::violates(1), Constraint::violates(2)],
        objective: Objective::Chsh(3),
    })
}

/// Maximizes the third Bob's CHSH subject to the first two violating.
pub fn max_chsh3_under_double_violation(resolution: f64) -> Result<ImpossibilityReport> {
    check_resolution(resolution, 0.005)?;
    let region = sweep(&triple_violation_spec(resolution)?)?;
    if region.is_empty() {
        return Err(Error::InvalidGrid("double-violation set is empty".into()));
    }
    let boundary_point = triple_boundary_point();
    let boundary_closed_form = closed_form_chain(&boundary_point)[2];
    let boundary_engine = chsh_value(&default_config(&boundary_point)?, 3)?.chsh_value;
    let inner_point = [
        boundary_point[0] + resolution,
        violation_threshold(&[boundary_point[0] + resolution]) + resolution,
        1.0,
    ];
    let inner_engine = chsh_value(&default_config(&inner_point)?, 3)?.chsh_value;
    let supremum = region
        .extremal_value
        .expect("nonempty region")
        .max(boundary_closed_form);
    Ok(ImpossibilityReport {
        region,
        boundary_point,
        boundary_closed_form,
        boundary_engine,
        inner_point,
        inner_engine,
        supremum,
        margin: CLASSICAL_BOUND - supremum,
    })
}

/// Regions of `(λ₁, λ₂, λ₃)` in which exactly the given pair of Bobs
/// violates CHSH. Keys are 1-based `(i, j)` with `i < j`.
pub fn pairwise_regions(resolution: f64) -> Result<BTreeMap<(usize, usize), RegionReport>> {
    check_resolution(resolution, 0.05)?;
    let mut out = BTreeMap::new();
    for (i, j, k) in [(1, 2, 3), (1, 3, 2), (2, 3, 1)] {
        let report = sweep(&SweepSpec {
            axes: vec![GridAxis::unit(resolution)?; 3],
            constraints: vec![
                Constraint::violates(i),
                Constraint::violates(j),
                Constraint::respects(k),
            ],
            objective: Objective::MinChsh(vec![i, j]),
        })?;
        out.insert((i, j), report);
    }
    Ok(out)
}

/// Constraints matching a key of [`pairwise_regions`].
pub fn pairwise_constraints(pair: (usize, usize)) -> Vec<Constraint> {
    let third = 6 - pair.0 - pair.1;
    vec![
        Constraint::violates(pair.0),
        Constraint::violates(pair.1),
        Constraint::respects(third),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub lambda: f64,
    pub quality_f: f64,
    pub precision_g: f64,
    pub chsh1: f64,
}

/// Optimal-pointer `(F, G)` and the first Bob's CHSH along a `λ` grid.
pub fn tradeoff_curve(grid: &[f64]) -> Result<Vec<TradeoffRow>> {
    grid.iter()
        .map(|&lambda| {
            let pq = quality_of(lambda)?;
            let chsh1 = chsh_value(&default_config(&[lambda])?, 1)?.chsh_value;
            Ok(TradeoffRow {
                lambda,
                quality_f: pq.quality(),
                precision_g: pq.precision(),
                chsh1,
            })
        })
        .collect()
}

/// `steps` evenly spaced values covering `[0, 1]`.
pub fn uniform_grid(steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 steps, got {steps}")));
    }
    let last = (steps - 1) as f64;
    Ok((0..steps).map(|i| i as f64 / last).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::closed_form_chsh;
    use proptest::prelude::*;

    #[test]
    fn lattice_nests_under_halving() {
        let coarse = GridAxis::unit(0.01).unwrap().points();
        let fine = GridAxis::unit(0.005).unwrap().points();
        assert_eq!(coarse.len(), 100);
        assert_eq!(fine.len(), 200);
        assert!(coarse.iter().all(|p| fine.contains(p)));
        assert_eq!(*coarse.last().unwrap(), 1.0);
        assert_eq!(GridAxis::fixed(0.3).unwrap().points(), vec![0.3]);
    }

    #[test]
    fn grid_validation() {
        assert!(GridAxis::new(0.0, 1.0, 0.1).is_err());
        assert!(GridAxis::new(0.5, 0.4, 0.1).is_err());
        assert!(GridAxis::new(0.1, 1.0, 0.0).is_err());
        assert!(GridAxis::new(0.1, 1.2, 0.1).is_err());
        assert!(double_violation_region(0.02).is_err());
        assert!(max_chsh3_under_double_violation(0.01).is_err());
        assert!(uniform_grid(1).is_err());
    }

    #[test]
    fn double_window_examples() {
        let report = double_violation_region(0.001).unwrap();
        let (lo, hi) = report.axis_bounds(0).unwrap();
        let (low, high) = crate::scenario::violation_window_bob1();
        assert!(lo > low && lo - low <= 0.001);
        assert!(hi < high && high - hi <= 0.001);

        let inside = closed_form_chain(&[0.8, 1.0]);
        assert!((inside[0] - 2.2627).abs() < 1e-4);
        assert!((inside[1] - SQRT_2 * 1.6).abs() < 1e-12);
        assert!(report.cells.iter().any(|c| (c.lambdas[0] - 0.8).abs() < 1e-12));

        let outside = closed_form_chain(&[0.95, 1.0]);
        assert!((outside[1] - 1.8558).abs() < 1e-4);
        assert!(!report.cells.iter().any(|c| (c.lambdas[0] - 0.95).abs() < 1e-12));
    }

    #[test]
    fn extremal_is_max_over_cells() {
        let report = double_violation_region(0.005).unwrap();
        let best = report.extremal_value.unwrap();
        for cell in &report.cells {
            assert!(cell.chsh[0].min(cell.chsh[1]) <= best);
            assert!(cell.chsh[0] > 2.0 && cell.chsh[1] > 2.0);
        }
    }

    #[test]
    fn onset_of_second_bob() {
        let onset = violation_onset(&[FRAC_1_SQRT_2 + 1e-6], 0.001).unwrap().unwrap();
        assert!((onset - 0.8284).abs() <= 0.001);
        // a sharp first Bob leaves nothing for the second
        assert_eq!(violation_onset(&[1.0], 0.001).unwrap(), None);
    }

    #[test]
    fn triple_bound_at_coarse_resolution() {
        let report = max_chsh3_under_double_violation(0.005).unwrap();
        assert!((report.supremum - 1.8833).abs() < 0.002);
        assert!(report.margin > 0.11);
        assert!(!report.triple_violation_possible());
        assert!((report.boundary_engine - report.boundary_closed_form).abs() < 1e-10);
        let grid_max = report.region.extremal_value.unwrap();
        assert!(grid_max <= report.boundary_closed_form);
        assert!(grid_max >= 1.8833 - 10.0 * 0.005);
        let arg = report.region.extremal.as_ref().unwrap();
        for (got, want) in arg.lambdas.iter().zip(triple_boundary_point()) {
            assert!((got - want).abs() <= 0.005 + 1e-12);
        }
        assert!(report.inner_engine < report.boundary_engine);
    }

    #[test]
    fn refinement_never_decreases_max() {
        let lipschitz = 6.0;
        let mut prev: Option<(f64, f64)> = None;
        for step in [0.02, 0.01, 0.005] {
            let v = sweep(&triple_violation_spec(step).unwrap())
                .unwrap()
                .extremal_value
                .unwrap();
            if let Some((pv, pstep)) = prev {
                assert!(v >= pv);
                assert!(v - pv <= pstep * lipschitz);
            }
            prev = Some((v, step));
        }
    }

    #[test]
    fn relaxing_second_constraint_lifts_bound() {
        let v = closed_form_chain(&[0.75, 0.1, 1.0]);
        assert!(v[0] > 2.0 && v[2] > 2.0);
        let report = sweep(&SweepSpec {
            axes: vec![GridAxis::unit(0.01).unwrap(); 3],
            constraints: vec![
                Constraint::violates(1),
                Constraint {
                    bob: 2,
                    threshold: 0.0,
                    comparison: Comparison::Above,
                },
            ],
            objective: Objective::Chsh(3),
        })
        .unwrap();
        assert!(report.extremal_value.unwrap() > 2.0);
    }

    #[test]
    fn pairwise_examples() {
        let regions = pairwise_regions(0.01).unwrap();
        assert_eq!(regions.len(), 3);
        for (pair, report) in &regions {
            assert!(!report.is_empty(), "{pair:?}");
            let witness = report.extremal.as_ref().unwrap();
            let engine: Vec<f64> = chsh_all(&default_config(&witness.lambdas).unwrap())
                .unwrap()
                .iter()
                .map(|r| r.chsh_value)
                .collect();
            assert!(pairwise_constraints(*pair).iter().all(|c| c.holds(&engine)));
        }
        let v = closed_form_chain(&[0.8, 0.95, 0.5]);
        assert!(v[0] > 2.0 && v[1] > 2.0);
        let v = closed_form_chain(&[0.75, 0.2, 1.0]);
        assert!((v[0] - 2.1213).abs() < 1e-4 && v[1] < 2.0 && v[2] > 2.0);
        let v = closed_form_chain(&[0.3, 0.8, 1.0]);
        assert!(v[0] < 2.0 && v[1] > 2.0 && v[2] > 2.0);
    }

    #[test]
    fn engine_certifies_window() {
        let report = double_violation_region(0.005).unwrap();
        let cert = certify_with_engine(
            &report,
            &[Constraint::violates(1), Constraint::violates(2)],
        )
        .unwrap();
        assert_eq!(cert.checked, report.cells.len());
        assert!(cert.all_feasible);
        assert!(cert.max_deviation < 1e-10);
    }

    #[test]
    fn tradeoff_examples() {
        let rows = tradeoff_curve(&[1.0, FRAC_1_SQRT_2, 0.0]).unwrap();
        assert_eq!((rows[0].quality_f, rows[0].precision_g), (0.0, 1.0));
        assert!((rows[0].chsh1 - TSIRELSON).abs() < 1e-10);
        assert!((rows[1].quality_f - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((rows[1].chsh1 - 2.0).abs() < 1e-10);
        for row in tradeoff_curve(&uniform_grid(101).unwrap()).unwrap() {
            let d = row.quality_f.powi(2) + row.precision_g.powi(2) - 1.0;
            assert!(d.abs() < 1e-14);
        }
        assert!(tradeoff_curve(&[1.01]).is_err());
    }

    proptest! {
        #[test]
        fn closed_form_increasing_in_own_sharpness(
            prior in proptest::collection::vec(0.01f64..0.99, 0..3),
            a in 0.01f64..0.99,
            b in 0.01f64..0.99,
        ) {
            prop_assume!((a - b).abs() > 1e-6);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let mut v_lo = prior.clone();
            v_lo.push(lo);
            let mut v_hi = prior.clone();
            v_hi.push(hi);
            let n = v_lo.len();
            prop_assert!(closed_form_chsh(&v_hi, n).unwrap() > closed_form_chsh(&v_lo, n).unwrap());
        }

        #[test]
        fn closed_form_decreasing_in_earlier_sharpness(
            mut lambdas in proptest::collection::vec(0.01f64..0.99, 2..5),
            k_seed in 0usize..8,
            bump in 1e-4f64..0.5,
        ) {
            let n = lambdas.len();
            let k = k_seed % (n - 1);
            let before = closed_form_chsh(&lambdas, n).unwrap();
            lambdas[k] = (lambdas[k] + bump).min(0.99);
            prop_assume!(lambdas[k] < 0.99);
            let after = closed_form_chsh(&lambdas, n).unwrap();
            prop_assert!(after < before);
        }
    }
}
