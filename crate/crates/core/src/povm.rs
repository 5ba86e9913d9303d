//! Single-parameter unsharp spin measurements and their Lüders instrument.
//!
//! The effect pair of a measurement along `n̂` with sharpness `λ` is
//! `E±= λP± + (1−λ)/2 · 𝕀`, i.e. eigenvalues `(1±λ)/2`. Its non-selective
//! Lüders channel coincides with the pointer model
//! `ρ′ = Fρ + (1−F)(P₊ρP₊ + P₋ρP₋)` for `F = √(1−λ²)`, while the outcome
//! law has precision `G = λ`, so the family sits on `F² + G² = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{
    dir_op, expectation, lift, sandwich, sharp_projector, tol, BlochDirection, DensityMatrix4,
    Operator2, Outcome, Wing, C64,
};

/// Probability below which an outcome is treated as a null event.
pub const NULL_EVENT_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnsharpMeasurement {
    direction: BlochDirection,
    sharpness: f64,
}

impl UnsharpMeasurement {
    /// `sharpness` must lie in `[0, 1]`; `0` is the identity instrument.
    pub fn new(direction: BlochDirection, sharpness: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sharpness) {
            return Err(Error::SharpnessOutOfRange(sharpness));
        }
        Ok(Self {
            direction,
            sharpness,
        })
    }

    pub fn sharp(direction: BlochDirection) -> Self {
        Self {
            direction,
            sharpness: 1.0,
        }
    }

    pub fn direction(&self) -> &BlochDirection {
        &self.direction
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    /// Quality factor `F = √(1−λ²)` of the equivalent pointer.
    pub fn quality(&self) -> f64 {
        (1.0 - self.sharpness * self.sharpness).sqrt()
    }
}

/// `(F, G)` summary of a pointer: `F` governs disturbance, `G` precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerQuality {
    quality_f: f64,
    precision_g: f64,
}

impl PointerQuality {
    /// Rejects pairs outside `[0,1]²` or beyond the optimal curve.
    pub fn new(quality_f: f64, precision_g: f64) -> Result<Self> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(quality_f)
            || !in_unit(precision_g)
            || quality_f * quality_f + precision_g * precision_g > 1.0 + tol::ALGEBRAIC
        {
            return Err(Error::UnattainablePointer {
                quality: quality_f,
                precision: precision_g,
            });
        }
        Ok(Self {
            quality_f,
            precision_g,
        })
    }

    /// Square pointer: `G = 1 − F`.
    pub fn square_pointer(quality_f: f64) -> Result<Self> {
        Self::new(quality_f, 1.0 - quality_f)
    }

    pub fn quality(&self) -> f64 {
        self.quality_f
    }

    pub fn precision(&self) -> f64 {
        self.precision_g
    }

    pub fn tradeoff_defect(&self) -> f64 {
        self.quality_f * self.quality_f + self.precision_g * self.precision_g - 1.0
    }

    pub fn is_optimal(&self, tol: f64) -> bool {
        self.tradeoff_defect().abs() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub p_plus: f64,
    pub p_minus: f64,
}

impl OutcomeDistribution {
    pub fn get(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Plus => self.p_plus,
            Outcome::Minus => self.p_minus,
        }
    }
}

/// `E±^λ = λP± + (1−λ)/2 · 𝕀`.
pub fn effect(m: &UnsharpMeasurement, outcome: Outcome) -> Operator2 {
    let lambda = m.sharpness;
    sharp_projector(&m.direction, outcome).scale(lambda)
        + Operator2::identity().scale(0.5 * (1.0 - lambda))
}

/// `√E± = a𝕀 ± b n̂·σ` with `a, b = (√((1+λ)/2) ± √((1−λ)/2))/2`.
pub fn effect_sqrt(m: &UnsharpMeasurement, outcome: Outcome) -> Operator2 {
    let hi = (0.5 * (1.0 + m.sharpness)).sqrt();
    let lo = (0.5 * (1.0 - m.sharpness)).sqrt();
    let a = 0.5 * (hi + lo);
    let b = 0.5 * (hi - lo) * outcome.sign();
    Operator2::identity().scale(a) + dir_op(&m.direction).scale(b)
}

/// Born probabilities of the unsharp measurement on one wing.
pub fn outcome_probability(
    rho: &DensityMatrix4,
    wing: Wing,
    m: &UnsharpMeasurement,
) -> OutcomeDistribution {
    let p = |o| {
        expectation(rho, &lift(&effect(m, o), wing))
            .expect("effects are Hermitian")
            .clamp(0.0, 1.0)
    };
    OutcomeDistribution {
        p_plus: p(Outcome::Plus),
        p_minus: p(Outcome::Minus),
    }
}

/// Selective Lüders update: returns `(p, √E ρ √E / p)`.
pub fn luders_selective(
    rho: &DensityMatrix4,
    wing: Wing,
    m: &UnsharpMeasurement,
    outcome: Outcome,
) -> Result<(f64, DensityMatrix4)> {
    let k = lift(&effect_sqrt(m, outcome), wing);
    let unnorm = sandwich(&k, rho.matrix());
    let p = unnorm.trace().re;
    if p < NULL_EVENT_THRESHOLD {
        return Err(Error::NullEvent(p));
    }
    let post = DensityMatrix4::new(unnorm / C64::new(p, 0.0))?;
    Ok((p, post))
}

/// Non-selective Lüders update `Σ± √E± ρ √E±`.
pub fn luders_nonselective(
    rho: &DensityMatrix4,
    wing: Wing,
    m: &UnsharpMeasurement,
) -> DensityMatrix4 {
    let out = Outcome::BOTH
        .iter()
        .map(|&o| sandwich(&lift(&effect_sqrt(m, o), wing), rho.matrix()))
        .fold(nalgebra::Matrix4::zeros(), |acc, t| acc + t);
    DensityMatrix4::new(out).expect("Lüders channel preserves states")
}

/// Optimal pointer matching sharpness `λ`: `(F, G) = (√(1−λ²), λ)`.
pub fn quality_of(lambda: f64) -> Result<PointerQuality> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::SharpnessOutOfRange(lambda));
    }
    Ok(PointerQuality {
        quality_f: (1.0 - lambda * lambda).sqrt(),
        precision_g: lambda,
    })
}

/// Pointer-model update `Fρ + (1−F)(π⁺ρπ⁺ + π⁻ρπ⁻)` along `n`.
pub fn pointer_model_update(
    rho: &DensityMatrix4,
    wing: Wing,
    n: &BlochDirection,
    pq: &PointerQuality,
) -> DensityMatrix4 {
    let f = pq.quality_f;
    let dephased = Outcome::BOTH
        .iter()
        .map(|&o| sandwich(&lift(&sharp_projector(n, o), wing), rho.matrix()))
        .fold(nalgebra::Matrix4::zeros(), |acc, t| acc + t);
    let m = rho.matrix() * C64::new(f, 0.0) + dephased * C64::new(1.0 - f, 0.0);
    DensityMatrix4::new(m).expect("pointer model preserves states")
}

/// Pointer-model outcome law `G·tr[π±ρ] + (1−G)/2`.
pub fn pointer_outcome_probability(
    rho: &DensityMatrix4,
    wing: Wing,
    n: &BlochDirection,
    pq: &PointerQuality,
) -> OutcomeDistribution {
    let g = pq.precision_g;
    let p = |o| {
        let born = expectation(rho, &lift(&sharp_projector(n, o), wing))
            .expect("projectors are Hermitian");
        (g * born + 0.5 * (1.0 - g)).clamp(0.0, 1.0)
    };
    OutcomeDistribution {
        p_plus: p(Outcome::Plus),
        p_minus: p(Outcome::Minus),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{hermitian_sqrt, kron, singlet, Axis};
    use nalgebra::Matrix4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z() -> BlochDirection {
        BlochDirection::axis(Axis::Z)
    }

    fn diag2(a: f64, b: f64) -> Operator2 {
        Operator2::from_pauli_components(0.5 * (a + b), [0.0, 0.0, 0.5 * (a - b)])
    }

    fn product_00() -> DensityMatrix4 {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        DensityMatrix4::from_pure([one, zero, zero, zero]).unwrap()
    }

    #[test]
    fn effect_examples() {
        let sharp = UnsharpMeasurement::new(z(), 1.0).unwrap();
        assert!(effect(&sharp, Outcome::Plus).max_abs_diff(&diag2(1.0, 0.0)) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let blind = UnsharpMeasurement::new(BlochDirection::random(&mut rng), 0.0).unwrap();
        for o in Outcome::BOTH {
            assert!(effect(&blind, o).max_abs_diff(&Operator2::identity().scale(0.5)) < 1e-15);
        }

        let m = UnsharpMeasurement::new(z(), 0.8).unwrap();
        assert!(effect(&m, Outcome::Plus).max_abs_diff(&diag2(0.9, 0.1)) < 1e-15);
    }

    #[test]
    fn sharpness_out_of_range() {
        assert!(UnsharpMeasurement::new(z(), 1.1).is_err());
        assert!(UnsharpMeasurement::new(z(), -0.1).is_err());
        assert!(UnsharpMeasurement::new(z(), f64::NAN).is_err());
        assert!(quality_of(1.5).is_err());
    }

    #[test]
    fn effect_eigenvalues_and_unsharpness() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let lambda: f64 = rng.random_range(0.01..0.99);
            let m = UnsharpMeasurement::new(BlochDirection::random(&mut rng), lambda).unwrap();
            for o in Outcome::BOTH {
                let e = effect(&m, o);
                let (lo, hi) = e.hermitian_eigenvalues().unwrap();
                assert!((lo - 0.5 * (1.0 - lambda)).abs() < 1e-12);
                assert!((hi - 0.5 * (1.0 + lambda)).abs() < 1e-12);
                assert!((e * e).max_abs_diff(&e) > 1e-3);
            }
            let sum = effect(&m, Outcome::Plus) + effect(&m, Outcome::Minus);
            assert!(sum.max_abs_diff(&Operator2::identity()) < 1e-12);
        }
    }

    #[test]
    fn closed_form_sqrt_matches_generic_sqrt() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let lambda: f64 = rng.random_range(0.0..=1.0);
            let m = UnsharpMeasurement::new(BlochDirection::random(&mut rng), lambda).unwrap();
            for o in Outcome::BOTH {
                let closed = effect_sqrt(&m, o);
                let generic = hermitian_sqrt(&effect(&m, o)).unwrap();
                assert!(closed.max_abs_diff(&generic) < 1e-12);
                assert!((closed * closed).max_abs_diff(&effect(&m, o)) < 1e-12);
            }
        }
        let m = UnsharpMeasurement::new(z(), 0.6).unwrap();
        let s = effect_sqrt(&m, Outcome::Plus);
        assert!(s.max_abs_diff(&diag2(0.8f64.sqrt(), 0.2f64.sqrt())) < 1e-15);
    }

    #[test]
    fn outcome_probability_examples() {
        let rho = singlet();
        for lambda in [1.0, 0.3] {
            let m = UnsharpMeasurement::new(z(), lambda).unwrap();
            let d = outcome_probability(&rho, Wing::Bob, &m);
            assert!((d.p_plus - 0.5).abs() < 1e-15 && (d.p_minus - 0.5).abs() < 1e-15);
        }
        let m = UnsharpMeasurement::new(z(), 0.8).unwrap();
        let d = outcome_probability(&product_00(), Wing::Bob, &m);
        assert!((d.p_plus - 0.9).abs() < 1e-15);
        assert!((d.p_minus - 0.1).abs() < 1e-15);
    }

    #[test]
    fn selective_projective_limit_on_singlet() {
        let m = UnsharpMeasurement::new(z(), 1.0).unwrap();
        let (p, post) = luders_selective(&singlet(), Wing::Bob, &m, Outcome::Plus).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        // Alice |1⟩, Bob |0⟩
        let mut expected = Matrix4::zeros();
        expected[(2, 2)] = C64::new(1.0, 0.0);
        let expected = DensityMatrix4::new(expected).unwrap();
        assert!(post.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn selective_identity_instrument() {
        let m = UnsharpMeasurement::new(z(), 0.0).unwrap();
        let (p, post) = luders_selective(&singlet(), Wing::Bob, &m, Outcome::Minus).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!(post.max_abs_diff(&singlet()) < 1e-15);
    }

    #[test]
    fn selective_unsharp_bob_marginal() {
        let m = UnsharpMeasurement::new(z(), 0.8).unwrap();
        let (p, post) = luders_selective(&singlet(), Wing::Bob, &m, Outcome::Plus).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!(post.reduced(Wing::Bob).max_abs_diff(&diag2(0.9, 0.1)) < 1e-12);
    }

    #[test]
    fn null_event_conditioning_rejected() {
        let m = UnsharpMeasurement::new(z(), 1.0).unwrap();
        let err = luders_selective(&product_00(), Wing::Bob, &m, Outcome::Minus).unwrap_err();
        assert!(matches!(err, Error::NullEvent(_)));
    }

    #[test]
    fn selective_mixture_equals_nonselective() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let rho = DensityMatrix4::random(&mut rng);
            let lambda: f64 = rng.random_range(0.0..=1.0);
            let m = UnsharpMeasurement::new(BlochDirection::random(&mut rng), lambda).unwrap();
            for wing in [Wing::Alice, Wing::Bob] {
                let mut mix = Matrix4::zeros();
                for o in Outcome::BOTH {
                    let (p, post) = luders_selective(&rho, wing, &m, o).unwrap();
                    mix += post.matrix() * C64::new(p, 0.0);
                }
                let ns = luders_nonselective(&rho, wing, &m);
                let mix = DensityMatrix4::new(mix).unwrap();
                assert!(mix.max_abs_diff(&ns) < 1e-12);
            }
        }
    }

    #[test]
    fn nonselective_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = DensityMatrix4::random(&mut rng);
        let n = BlochDirection::random(&mut rng);
        let id = UnsharpMeasurement::new(n, 0.0).unwrap();
        assert!(luders_nonselective(&rho, Wing::Bob, &id).max_abs_diff(&rho) < 1e-15);

        // projective: Bob's reduced state becomes diagonal in the n basis
        let sharp = UnsharpMeasurement::sharp(n);
        let out = luders_nonselective(&rho, Wing::Bob, &sharp);
        let reduced = out.reduced(Wing::Bob);
        let (_, v) = reduced.pauli_components();
        let along = v[0] * n.x() + v[1] * n.y() + v[2] * n.z();
        let perp2 = v.iter().map(|c| c * c).sum::<f64>() - along * along;
        assert!(perp2.abs() < 1e-24);
    }

    #[test]
    fn nonselective_closed_form_at_inverse_root_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let lambda = std::f64::consts::FRAC_1_SQRT_2;
        for _ in 0..20 {
            let rho = DensityMatrix4::random(&mut rng);
            let n = BlochDirection::random(&mut rng);
            let m = UnsharpMeasurement::new(n, lambda).unwrap();
            let luders = luders_nonselective(&rho, Wing::Bob, &m);
            let mut dephased = Matrix4::zeros();
            for o in Outcome::BOTH {
                let p = lift(&sharp_projector(&n, o), Wing::Bob);
                dephased += p.matrix() * rho.matrix() * p.matrix();
            }
            let f = (1.0 - lambda * lambda).sqrt();
            let closed = rho.matrix() * C64::new(f, 0.0) + dephased * C64::new(1.0 - f, 0.0);
            assert!(
                (luders.matrix() - closed)
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max)
                    < 1e-12
            );
        }
    }

    #[test]
    fn quality_examples() {
        let q = quality_of(1.0).unwrap();
        assert_eq!((q.quality(), q.precision()), (0.0, 1.0));
        let q = quality_of(0.0).unwrap();
        assert_eq!((q.quality(), q.precision()), (1.0, 0.0));
        let q = quality_of(0.6).unwrap();
        assert!((q.quality() - 0.8).abs() < 1e-15 && q.precision() == 0.6);
        assert!(q.is_optimal(1e-14));
    }

    #[test]
    fn suboptimal_pointers_are_representable() {
        let square = PointerQuality::square_pointer(0.5).unwrap();
        assert!(square.tradeoff_defect() < 0.0);
        assert!(!square.is_optimal(1e-3));
        assert!(PointerQuality::new(0.9, 0.9).is_err());
        assert!(PointerQuality::new(-0.1, 0.5).is_err());
    }

    #[test]
    fn pointer_model_limits_and_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = DensityMatrix4::random(&mut rng);
        let n = BlochDirection::random(&mut rng);
        let keep = PointerQuality::new(1.0, 0.0).unwrap();
        assert!(pointer_model_update(&rho, Wing::Bob, &n, &keep).max_abs_diff(&rho) < 1e-15);
        let full = PointerQuality::new(0.0, 1.0).unwrap();
        let sharp = UnsharpMeasurement::sharp(n);
        assert!(
            pointer_model_update(&rho, Wing::Bob, &n, &full)
                .max_abs_diff(&luders_nonselective(&rho, Wing::Bob, &sharp))
                < 1e-12
        );
        let m = UnsharpMeasurement::new(n, 0.8).unwrap();
        let pq = PointerQuality::new((1.0f64 - 0.64).sqrt(), 0.8).unwrap();
        assert!(
            pointer_model_update(&rho, Wing::Alice, &n, &pq)
                .max_abs_diff(&luders_nonselective(&rho, Wing::Alice, &m))
                < 1e-12
        );
        let a = pointer_outcome_probability(&rho, Wing::Bob, &n, &pq);
        let b = outcome_probability(&rho, Wing::Bob, &m);
        assert!((a.p_plus - b.p_plus).abs() < 1e-12);
    }

    #[test]
    fn projective_limit_matches_born_rule() {
        let x = BlochDirection::axis(Axis::X);
        let zz = kron(&dir_op(&x), &dir_op(&x));
        let rho = singlet();
        let m = UnsharpMeasurement::sharp(x);
        let d = outcome_probability(&rho, Wing::Alice, &m);
        assert_eq!((d.p_plus, d.p_minus), (0.5, 0.5));
        let (_, post) = luders_selective(&rho, Wing::Alice, &m, Outcome::Plus).unwrap();
        // after Alice sees +x, Bob is in -x with certainty
        let e = expectation(&post, &zz).unwrap();
        assert!((e + 1.0).abs() < 1e-12);
    }
}
