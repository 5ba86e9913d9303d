//! Seeded trajectory sampler.
//!
//! Each trajectory starts from the singlet, lets every Bob draw a setting
//! from its input weights and sample an outcome with selective Lüders
//! collapse, then measures Alice projectively. The Lüders operators `√E` map
//! pure states to pure states, so a trajectory carries a 4-component state
//! vector rather than a density matrix.
//!
//! Random numbers come from ChaCha8 seeded with `seed`. Trajectories are
//! grouped into chunks of [`CHUNK_SIZE`]; chunk `c` uses ChaCha stream `c`,
//! so results do not depend on how chunks are scheduled across threads.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::effect_sqrt;
use crate::qops::{sharp_projector, Operator2, Outcome, C64};
use crate::scenario::{ScenarioConfig, CHSH_SIGNS};

pub const CHUNK_SIZE: u64 = 1 << 14;

/// Below this many shots an estimate carries a warning.
pub const MIN_SHOTS: u64 = 10_000;

type Mat2 = [[C64; 2]; 2];
type State = [C64; 4];

fn to_mat2(op: &Operator2) -> Mat2 {
    [[op.get(0, 0), op.get(0, 1)], [op.get(1, 0), op.get(1, 1)]]
}

fn apply_bob(k: &Mat2, psi: &State) -> State {
    [
        k[0][0] * psi[0] + k[0][1] * psi[1],
        k[1][0] * psi[0] + k[1][1] * psi[1],
        k[0][0] * psi[2] + k[0][1] * psi[3],
        k[1][0] * psi[2] + k[1][1] * psi[3],
    ]
}

fn apply_alice(k: &Mat2, psi: &State) -> State {
    [
        k[0][0] * psi[0] + k[0][1] * psi[2],
        k[0][0] * psi[1] + k[0][1] * psi[3],
        k[1][0] * psi[0] + k[1][1] * psi[2],
        k[1][0] * psi[1] + k[1][1] * psi[3],
    ]
}

fn norm_sqr(psi: &State) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

fn scaled(psi: State, factor: f64) -> State {
    psi.map(|z| z * factor)
}

fn singlet_vector() -> State {
    let zero = C64::new(0.0, 0.0);
    [
        zero,
        C64::new(FRAC_1_SQRT_2, 0.0),
        C64::new(-FRAC_1_SQRT_2, 0.0),
        zero,
    ]
}

/// Samples one outcome of the two-element instrument `{k₊, k₋}`.
fn sample_instrument<R: Rng + ?Sized>(
    rng: &mut R,
    psi: &State,
    kraus: &[Mat2; 2],
    apply: fn(&Mat2, &State) -> State,
) -> (Outcome, State) {
    let plus = apply(&kraus[0], psi);
    let p_plus = norm_sqr(&plus);
    if rng.random::<f64>() < p_plus {
        (Outcome::Plus, scaled(plus, 1.0 / p_plus.sqrt()))
    } else {
        let minus = apply(&kraus[1], psi);
        let p_minus = norm_sqr(&minus);
        (Outcome::Minus, scaled(minus, 1.0 / p_minus.sqrt()))
    }
}

/// When Alice measures relative to the Bob chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AliceOrder {
    First,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draw {
    pub setting: usize,
    pub outcome: Outcome,
}

/// Where a trajectory's random numbers came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub seed: u64,
    pub stream: u64,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub alice: Draw,
    pub bobs: Vec<Draw>,
    pub lineage: Option<SeedLineage>,
}

#[derive(Debug, Clone)]
struct BobKraus {
    weight0: f64,
    kraus: [[Mat2; 2]; 2],
}

/// Precomputed Lüders operators of a scenario.
#[derive(Debug, Clone)]
pub struct TrajectorySampler {
    alice: [[Mat2; 2]; 2],
    bobs: Vec<BobKraus>,
}

impl TrajectorySampler {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let alice = cfg.alice_settings().map(|dir| {
            [
                to_mat2(&sharp_projector(&dir, Outcome::Plus)),
                to_mat2(&sharp_projector(&dir, Outcome::Minus)),
            ]
        });
        let bobs = cfg
            .bobs()
            .iter()
            .map(|stage| {
                let mut kraus = [[[[C64::new(0.0, 0.0); 2]; 2]; 2]; 2];
                for (setting, slot) in kraus.iter_mut().enumerate() {
                    let m = stage.measurement(setting)?;
                    *slot = [
                        to_mat2(&effect_sqrt(&m, Outcome::Plus)),
                        to_mat2(&effect_sqrt(&m, Outcome::Minus)),
                    ];
                }
                Ok(BobKraus {
                    weight0: stage.input_weights[0],
                    kraus,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { alice, bobs })
    }

    pub fn n_bobs(&self) -> usize {
        self.bobs.len()
    }

    fn sample_alice<R: Rng + ?Sized>(&self, rng: &mut R, psi: &mut State) -> Draw {
        let setting = usize::from(rng.random::<f64>() >= 0.5);
        let (outcome, next) = sample_instrument(rng, psi, &self.alice[setting], apply_alice);
        *psi = next;
        Draw { setting, outcome }
    }

    fn sample_bob<R: Rng + ?Sized>(&self, rng: &mut R, bob: &BobKraus, psi: &mut State) -> Draw {
        let setting = usize::from(rng.random::<f64>() >= bob.weight0);
        let (outcome, next) = sample_instrument(rng, psi, &bob.kraus[setting], apply_bob);
        *psi = next;
        Draw { setting, outcome }
    }

    /// Runs Bobs `1..=upto` and Alice; returns Alice's draw and Bob `upto`'s.
    fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R, upto: usize, order: AliceOrder) -> (Draw, Draw) {
        let mut psi = singlet_vector();
        let mut alice = None;
        if order == AliceOrder::First {
            alice = Some(self.sample_alice(rng, &mut psi));
        }
        let mut last = None;
        for bob in &self.bobs[..upto] {
            last = Some(self.sample_bob(rng, bob, &mut psi));
        }
        let alice = alice.unwrap_or_else(|| self.sample_alice(rng, &mut psi));
        (alice, last.expect("upto >= 1"))
    }

    /// Runs the whole chain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, order: AliceOrder) -> TrajectoryRecord {
        let mut psi = singlet_vector();
        let mut alice = None;
        if order == AliceOrder::First {
            alice = Some(self.sample_alice(rng, &mut psi));
        }
        let bobs = self
            .bobs
            .iter()
            .map(|bob| self.sample_bob(rng, bob, &mut psi))
            .collect();
        let alice = alice.unwrap_or_else(|| self.sample_alice(rng, &mut psi));
        TrajectoryRecord {
            alice,
            bobs,
            lineage: None,
        }
    }
}

/// One experimental run with Alice measured last.
pub fn run_trajectory<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<TrajectoryRecord> {
    Ok(TrajectorySampler::new(cfg)?.sample(rng, AliceOrder::Last))
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunk_ranges(shots: u64) -> impl ParallelIterator<Item = (u64, u64)> {
    let chunks = shots.div_ceil(CHUNK_SIZE);
    (0..chunks)
        .into_par_iter()
        .map(move |c| (c, (shots - c * CHUNK_SIZE).min(CHUNK_SIZE)))
}

/// `shots` full trajectories with their seed lineage.
pub fn trajectories(
    cfg: &ScenarioConfig,
    shots: u64,
    seed: u64,
    order: AliceOrder,
) -> Result<Vec<TrajectoryRecord>> {
    let sampler = TrajectorySampler::new(cfg)?;
    let chunks: Vec<Vec<TrajectoryRecord>> = chunk_ranges(shots)
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            (0..len)
                .map(|i| {
                    let mut rec = sampler.sample(&mut rng, order);
                    rec.lineage = Some(SeedLineage {
                        seed,
                        stream: c,
                        index: c * CHUNK_SIZE + i,
                    });
                    rec
                })
                .collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Outcome counts `[alice_setting][bob_setting][a][b]`, index 0 meaning `+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JointCounts {
    pub counts: [[[[u64; 2]; 2]; 2]; 2],
}

fn outcome_index(o: Outcome) -> usize {
    match o {
        Outcome::Plus => 0,
        Outcome::Minus => 1,
    }
}

impl JointCounts {
    fn record(&mut self, alice: Draw, bob: Draw) {
        self.counts[alice.setting][bob.setting][outcome_index(alice.outcome)]
            [outcome_index(bob.outcome)] += 1;
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.flat_mut().zip(other.flat()) {
            *a += b;
        }
        self
    }

    fn flat(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.iter().flatten().flatten().flatten().copied()
    }

    fn flat_mut(&mut self) -> impl Iterator<Item = &mut u64> + '_ {
        self.counts.iter_mut().flatten().flatten().flatten()
    }

    /// All 16 cells in a fixed order.
    pub fn cells(&self) -> Vec<u64> {
        self.flat().collect()
    }

    pub fn total(&self) -> u64 {
        self.flat().sum()
    }

    /// Trials and `Σ a·b` for one setting pair.
    pub fn setting_stats(&self, alice_setting: usize, bob_setting: usize) -> (u64, i64) {
        let t = &self.counts[alice_setting][bob_setting];
        let same = t[0][0] + t[1][1];
        let diff = t[0][1] + t[1][0];
        (same + diff, same as i64 - diff as i64)
    }
}

/// Joint outcome counts of Alice and Bob `bob` over `shots` trajectories.
pub fn joint_counts(
    cfg: &ScenarioConfig,
    bob: usize,
    shots: u64,
    seed: u64,
    order: AliceOrder,
) -> Result<JointCounts> {
    cfg.check_bob(bob)?;
    let sampler = TrajectorySampler::new(cfg)?;
    Ok(chunk_ranges(shots)
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            let mut counts = JointCounts::default();
            for _ in 0..len {
                let (alice, last) = sampler.sample_pair(&mut rng, bob, order);
                counts.record(alice, last);
            }
            counts
        })
        .reduce(JointCounts::default, JointCounts::merge))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateStatus {
    Ok,
    /// Fewer than [`MIN_SHOTS`] shots; the error bar is unreliable.
    LowShots,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub bob: usize,
    pub estimate: f64,
    pub standard_error: f64,
    pub shots: u64,
    pub seed: u64,
    pub correlators: [[f64; 2]; 2],
    pub status: EstimateStatus,
}

/// CHSH estimate from counts, conditioning on the drawn settings.
///
/// Each correlator is the mean of `a·b` over its setting pair; its variance
/// is the sample variance over the trials of that pair divided by their
/// number, and the four variances add.
pub fn chsh_from_counts(counts: &JointCounts) -> Result<([[f64; 2]; 2], f64, f64)> {
    let mut correlators = [[0.0; 2]; 2];
    let mut estimate = 0.0;
    let mut variance = 0.0;
    for (a, row) in CHSH_SIGNS.iter().enumerate() {
        for (b, sign) in row.iter().enumerate() {
            let (n, sum) = counts.setting_stats(a, b);
            if n < 2 {
                return Err(Error::InvalidArgument(format!(
                    "setting pair ({a}, {b}) drawn {n} times"
                )));
            }
            let n = n as f64;
            let mean = sum as f64 / n;
            let sample_var = (n / (n - 1.0)) * (1.0 - mean * mean);
            correlators[a][b] = mean;
            estimate += sign * mean;
            variance += sample_var / n;
        }
    }
    Ok((correlators, estimate, variance.sqrt()))
}

/// Monte Carlo CHSH estimate for Bob `bob`; deterministic in `(cfg, shots, seed)`.
pub fn estimate_chsh(cfg: &ScenarioConfig, bob: usize, shots: u64, seed: u64) -> Result<EstimateReport> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let counts = joint_counts(cfg, bob, shots, seed, AliceOrder::Last)?;
    let (correlators, estimate, standard_error) = chsh_from_counts(&counts)?;
    Ok(EstimateReport {
        bob,
        estimate,
        standard_error,
        shots,
        seed,
        correlators,
        status: if shots < MIN_SHOTS {
            EstimateStatus::LowShots
        } else {
            EstimateStatus::Ok
        },
    })
}
