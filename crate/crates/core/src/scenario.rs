//! Sequential-observer engine.
//!
//! One Alice measures projectively on the first wing. A chain of Bobs acts
//! one after another on the second wing, each choosing one of two settings
//! and measuring unsharply with the Lüders instrument. A later Bob does not
//! know the earlier Bobs' inputs, so the state reaching him is the
//! input-averaged non-selective image of the singlet.
//!
//! Bob indices are 1-based throughout (`bob = 1` is the first Bob).
//!
//! The CHSH combination is
//! `S = E(a₀,b₀) − E(a₀,b₁) + E(a₁,b₀) + E(a₁,b₁)`, which for the default
//! settings (Alice `{x̂, ẑ}`, Bob `{−(ẑ+x̂)/√2, (x̂−ẑ)/√2}`) gives `2√2·λ₁`
//! for the first Bob.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::povm::{effect, luders_nonselective, UnsharpMeasurement};
use crate::qops::{
    dir_op, expectation, kron, sharp_projector, singlet, tol, Axis, BlochDirection,
    DensityMatrix4, Outcome, Wing, C64,
};

/// Sign of each correlator in the CHSH sum, indexed `[alice][bob]`.
pub const CHSH_SIGNS: [[f64; 2]; 2] = [[1.0, -1.0], [1.0, 1.0]];

/// One Bob in the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BobStage {
    pub settings: [BlochDirection; 2],
    pub sharpness: f64,
    pub input_weights: [f64; 2],
}

impl BobStage {
    pub fn measurement(&self, setting: usize) -> Result<UnsharpMeasurement> {
        let dir = self
            .settings
            .get(setting)
            .ok_or(Error::IndexOutOfRange {
                index: setting,
                limit: 2,
            })?;
        UnsharpMeasurement::new(*dir, self.sharpness)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    alice_settings: [BlochDirection; 2],
    bobs: Vec<BobStage>,
}

fn check_weights(w: [f64; 2]) -> Result<()> {
    if w.iter().any(|v| !v.is_finite() || *v < 0.0)
        || (w[0] + w[1] - 1.0).abs() > tol::ALGEBRAIC
    {
        return Err(Error::InvalidWeights(w[0], w[1]));
    }
    Ok(())
}

/// Alice's settings `{x̂, ẑ}`.
pub fn default_alice_settings() -> [BlochDirection; 2] {
    [BlochDirection::axis(Axis::X), BlochDirection::axis(Axis::Z)]
}

/// Bob's settings `{−(ẑ+x̂)/√2, (x̂−ẑ)/√2}`.
pub fn default_bob_settings() -> [BlochDirection; 2] {
    [
        BlochDirection::new(-FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2).expect("unit"),
        BlochDirection::new(FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2).expect("unit"),
    ]
}

impl ScenarioConfig {
    pub fn new(alice_settings: [BlochDirection; 2], bobs: Vec<BobStage>) -> Result<Self> {
        if bobs.is_empty() {
            return Err(Error::EmptyChain);
        }
        for bob in &bobs {
            if !(0.0..=1.0).contains(&bob.sharpness) {
                return Err(Error::SharpnessOutOfRange(bob.sharpness));
            }
            check_weights(bob.input_weights)?;
        }
        Ok(Self {
            alice_settings,
            bobs,
        })
    }

    pub fn alice_settings(&self) -> &[BlochDirection; 2] {
        &self.alice_settings
    }

    pub fn bobs(&self) -> &[BobStage] {
        &self.bobs
    }

    pub fn n_bobs(&self) -> usize {
        self.bobs.len()
    }

    pub fn sharpness(&self) -> Vec<f64> {
        self.bobs.iter().map(|b| b.sharpness).collect()
    }

    /// 1-based access.
    pub fn bob(&self, bob: usize) -> Result<&BobStage> {
        self.check_bob(bob)?;
        Ok(&self.bobs[bob - 1])
    }

    pub fn check_bob(&self, bob: usize) -> Result<()> {
        if bob == 0 || bob > self.bobs.len() {
            return Err(Error::IndexOutOfRange {
                index: bob,
                limit: self.bobs.len(),
            });
        }
        Ok(())
    }

    pub fn with_input_weights(mut self, bob: usize, weights: [f64; 2]) -> Result<Self> {
        self.check_bob(bob)?;
        check_weights(weights)?;
        self.bobs[bob - 1].input_weights = weights;
        Ok(self)
    }

    pub fn with_bob_settings(mut self, bob: usize, settings: [BlochDirection; 2]) -> Result<Self> {
        self.check_bob(bob)?;
        self.bobs[bob - 1].settings = settings;
        Ok(self)
    }

    pub fn is_unbiased(&self) -> bool {
        self.bobs.iter().all(|b| b.input_weights == [0.5, 0.5])
    }

    /// Short hex digest of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&json);
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Default chain: standard CHSH settings for every party, unbiased inputs.
pub fn default_config(sharpness: &[f64]) -> Result<ScenarioConfig> {
    let bobs = sharpness
        .iter()
        .map(|&lambda| BobStage {
            settings: default_bob_settings(),
            sharpness: lambda,
            input_weights: [0.5, 0.5],
        })
        .collect();
    ScenarioConfig::new(default_alice_settings(), bobs)
}

/// Non-selective channel of one Bob with a known input.
fn bob_channel(rho: &DensityMatrix4, stage: &BobStage, setting: usize) -> Result<DensityMatrix4> {
    Ok(luders_nonselective(rho, Wing::Bob, &stage.measurement(setting)?))
}

/// Input-averaged channel of one Bob.
fn averaged_bob_channel(rho: &DensityMatrix4, stage: &BobStage) -> Result<DensityMatrix4> {
    let mut acc = Matrix4::zeros();
    for (setting, &w) in stage.input_weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        acc += bob_channel(rho, stage, setting)?.matrix() * C64::new(w, 0.0);
    }
    DensityMatrix4::new(acc)
}

/// Input-averaged states reaching each Bob.
#[derive(Debug, Clone)]
pub struct AveragedChain {
    states: Vec<DensityMatrix4>,
}

impl AveragedChain {
    /// Propagates the singlet up to (not through) Bob `upto`.
    pub fn new(cfg: &ScenarioConfig, upto: usize) -> Result<Self> {
        cfg.check_bob(upto)?;
        let mut states = Vec::with_capacity(upto);
        states.push(singlet());
        for stage in &cfg.bobs[..upto - 1] {
            let next = averaged_bob_channel(states.last().expect("nonempty"), stage)?;
            states.push(next);
        }
        Ok(Self { states })
    }

    pub fn full(cfg: &ScenarioConfig) -> Result<Self> {
        Self::new(cfg, cfg.n_bobs())
    }

    pub fn state_before(&self, bob: usize) -> Result<&DensityMatrix4> {
        if bob == 0 || bob > self.states.len() {
            return Err(Error::IndexOutOfRange {
                index: bob,
                limit: self.states.len(),
            });
        }
        Ok(&self.states[bob - 1])
    }

    pub fn states(&self) -> &[DensityMatrix4] {
        &self.states
    }
}

/// State reaching Bob `bob` when the earlier Bobs' inputs are known.
pub fn branch_state(
    cfg: &ScenarioConfig,
    bob: usize,
    prior_inputs: &[usize],
) -> Result<DensityMatrix4> {
    cfg.check_bob(bob)?;
    if prior_inputs.len() != bob - 1 {
        return Err(Error::InvalidArgument(format!(
            "Bob {bob} needs {} prior inputs, got {}",
            bob - 1,
            prior_inputs.len()
        )));
    }
    let mut rho = singlet();
    for (stage, &y) in cfg.bobs.iter().zip(prior_inputs) {
        rho = bob_channel(&rho, stage, y)?;
    }
    Ok(rho)
}

fn alice_projector(cfg: &ScenarioConfig, setting: usize, a: Outcome) -> Result<crate::qops::Operator2> {
    let dir = cfg.alice_settings.get(setting).ok_or(Error::IndexOutOfRange {
        index: setting,
        limit: 2,
    })?;
    Ok(sharp_projector(dir, a))
}

/// `tr[ρ (P_a ⊗ E_b)]` on a given state.
fn joint_on_state(
    cfg: &ScenarioConfig,
    rho: &DensityMatrix4,
    alice_setting: usize,
    a: Outcome,
    bob: usize,
    bob_setting: usize,
    b: Outcome,
) -> Result<f64> {
    let pa = alice_projector(cfg, alice_setting, a)?;
    let eb = effect(&cfg.bob(bob)?.measurement(bob_setting)?, b);
    Ok(expectation(rho, &kron(&pa, &eb))?.clamp(0.0, 1.0))
}

/// Joint probability `p(a, bₙ)` for given inputs of Alice and Bob `bob`,
/// averaging over the unknown inputs of all earlier Bobs.
pub fn joint_probability(
    cfg: &ScenarioConfig,
    alice_setting: usize,
    a: Outcome,
    bob: usize,
    bob_setting: usize,
    b: Outcome,
) -> Result<f64> {
    let chain = AveragedChain::new(cfg, bob)?;
    joint_on_state(
        cfg,
        chain.state_before(bob)?,
        alice_setting,
        a,
        bob,
        bob_setting,
        b,
    )
}

/// Joint probability conditioned on known earlier inputs.
pub fn joint_probability_branch(
    cfg: &ScenarioConfig,
    prior_inputs: &[usize],
    alice_setting: usize,
    a: Outcome,
    bob: usize,
    bob_setting: usize,
    b: Outcome,
) -> Result<f64> {
    let rho = branch_state(cfg, bob, prior_inputs)?;
    joint_on_state(cfg, &rho, alice_setting, a, bob, bob_setting, b)
}

fn correlation_on_state(
    cfg: &ScenarioConfig,
    rho: &DensityMatrix4,
    alice_setting: usize,
    bob: usize,
    bob_setting: usize,
) -> Result<f64> {
    let mut e = 0.0;
    for a in Outcome::BOTH {
        for b in Outcome::BOTH {
            e += a.sign()
                * b.sign()
                * joint_on_state(cfg, rho, alice_setting, a, bob, bob_setting, b)?;
        }
    }
    Ok(e)
}

/// `E = Σ a·b·p(a,b)` for Alice's and Bob `bob`'s inputs.
pub fn averaged_correlation(
    cfg: &ScenarioConfig,
    alice_setting: usize,
    bob: usize,
    bob_setting: usize,
) -> Result<f64> {
    let chain = AveragedChain::new(cfg, bob)?;
    correlation_on_state(cfg, chain.state_before(bob)?, alice_setting, bob, bob_setting)
}

/// `tr[ρ̄ (â·σ ⊗ λŷ·σ)]` on the averaged state.
pub fn correlation_by_trace(
    cfg: &ScenarioConfig,
    alice_setting: usize,
    bob: usize,
    bob_setting: usize,
) -> Result<f64> {
    let chain = AveragedChain::new(cfg, bob)?;
    let stage = cfg.bob(bob)?;
    let a = cfg.alice_settings.get(alice_setting).ok_or(Error::IndexOutOfRange {
        index: alice_setting,
        limit: 2,
    })?;
    let y = stage.settings.get(bob_setting).ok_or(Error::IndexOutOfRange {
        index: bob_setting,
        limit: 2,
    })?;
    let obs = kron(&dir_op(a), &dir_op(y).scale(stage.sharpness));
    expectation(chain.state_before(bob)?, &obs)
}

/// Correlation conditioned on known earlier inputs.
pub fn correlation_branch(
    cfg: &ScenarioConfig,
    prior_inputs: &[usize],
    alice_setting: usize,
    bob: usize,
    bob_setting: usize,
) -> Result<f64> {
    let rho = branch_state(cfg, bob, prior_inputs)?;
    correlation_on_state(cfg, &rho, alice_setting, bob, bob_setting)
}

/// Correlation averaged over explicitly enumerated earlier-input branches.
/// Exponential in `bob`; kept as a cross-check for short chains.
pub fn averaged_correlation_by_branches(
    cfg: &ScenarioConfig,
    alice_setting: usize,
    bob: usize,
    bob_setting: usize,
) -> Result<f64> {
    cfg.check_bob(bob)?;
    let earlier = bob - 1;
    let mut total = 0.0;
    for mask in 0..(1usize << earlier) {
        let inputs: Vec<usize> = (0..earlier).map(|k| (mask >> k) & 1).collect();
        let weight: f64 = inputs
            .iter()
            .enumerate()
            .map(|(k, &y)| cfg.bobs[k].input_weights[y])
            .product();
        if weight == 0.0 {
            continue;
        }
        total += weight * correlation_branch(cfg, &inputs, alice_setting, bob, bob_setting)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DensityMatrix,
    ClosedForm,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::DensityMatrix => "density_matrix",
            Method::ClosedForm => "closed_form",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    pub bob_index: usize,
    pub chsh_value: f64,
    pub method: Method,
    pub sharpness: Vec<f64>,
    pub config_digest: String,
}

pub const TSIRELSON: f64 = 2.0 * SQRT_2;

fn tsirelson_checked(value: f64) -> Result<f64> {
    if value.abs() > TSIRELSON + 1e-9 {
        return Err(Error::TsirelsonViolation(value));
    }
    Ok(value)
}

fn chsh_on_state(cfg: &ScenarioConfig, rho: &DensityMatrix4, bob: usize) -> Result<f64> {
    let mut s = 0.0;
    for (alice, row) in CHSH_SIGNS.iter().enumerate() {
        for (bob_setting, sign) in row.iter().enumerate() {
            s += sign * correlation_on_state(cfg, rho, alice, bob, bob_setting)?;
        }
    }
    tsirelson_checked(s)
}

/// CHSH value between Alice and Bob `bob` from the density-matrix engine.
pub fn chsh_value(cfg: &ScenarioConfig, bob: usize) -> Result<ChshReport> {
    let chain = AveragedChain::new(cfg, bob)?;
    Ok(ChshReport {
        bob_index: bob,
        chsh_value: chsh_on_state(cfg, chain.state_before(bob)?, bob)?,
        method: Method::DensityMatrix,
        sharpness: cfg.sharpness(),
        config_digest: cfg.digest(),
    })
}

/// CHSH values for every Bob, sharing one propagation.
pub fn chsh_all(cfg: &ScenarioConfig) -> Result<Vec<ChshReport>> {
    let chain = AveragedChain::full(cfg)?;
    let digest = cfg.digest();
    (1..=cfg.n_bobs())
        .map(|bob| {
            Ok(ChshReport {
                bob_index: bob,
                chsh_value: chsh_on_state(cfg, chain.state_before(bob)?, bob)?,
                method: Method::DensityMatrix,
                sharpness: cfg.sharpness(),
                config_digest: digest.clone(),
            })
        })
        .collect()
}

/// Per-Bob coherence factor `(1 + √(1−λ²))/2` seen by all later Bobs.
pub fn survival_factor(lambda: f64) -> f64 {
    0.5 * (1.0 + (1.0 - lambda * lambda).sqrt())
}

/// `CHSHₙ = 2√2 λₙ ∏_{k<n} (1 + √(1−λₖ²))/2`, valid for the default
/// settings with unbiased inputs.
pub fn closed_form_chsh(sharpness: &[f64], bob: usize) -> Result<f64> {
    if bob == 0 || bob > sharpness.len() {
        return Err(Error::IndexOutOfRange {
            index: bob,
            limit: sharpness.len(),
        });
    }
    if let Some(&bad) = sharpness[..bob].iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::SharpnessOutOfRange(bad));
    }
    let prior: f64 = sharpness[..bob - 1].iter().map(|&l| survival_factor(l)).product();
    Ok(TSIRELSON * sharpness[bob - 1] * prior)
}

/// Smallest sharpness for which the next Bob exceeds 2 after the given
/// earlier Bobs. May exceed 1, meaning no violation is possible.
pub fn violation_threshold(prior_sharpness: &[f64]) -> f64 {
    let prior: f64 = prior_sharpness.iter().map(|&l| survival_factor(l)).product();
    2.0 / (TSIRELSON * prior)
}

/// `(1/√2, √(2(√2−1)))`: Bob¹ violates iff `λ₁ > low`; Bob² with `λ₂ = 1`
/// violates iff `λ₁ < high`.
pub fn violation_window_bob1() -> (f64, f64) {
    (FRAC_1_SQRT_2, (2.0 * (SQRT_2 - 1.0)).sqrt())
}
