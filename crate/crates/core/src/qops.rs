//! Fixed-dimension complex linear algebra for one and two qubits.
//!
//! Two-qubit operators use the ordering `A ⊗ B` with Alice as the first
//! factor: basis index `2 * alice_bit + bob_bit`, so `|01⟩` (Alice 0, Bob 1)
//! is index 1.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Complex, Matrix2, Matrix4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Tolerances shared by every module.
pub mod tol {
    /// Algebraic identities (entrywise).
    pub const ALGEBRAIC: f64 = 1e-12;
    /// Spectral checks (eigenvalue floor, imaginary residue of traces).
    pub const SPECTRAL: f64 = 1e-10;
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Which wing of the pair an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wing {
    Alice,
    Bob,
}

/// A two-valued measurement outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

/// A real unit 3-vector on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochDirection {
    x: f64,
    y: f64,
    z: f64,
}

impl BlochDirection {
    /// Accepts only vectors with `x² + y² + z² = 1` within [`tol::ALGEBRAIC`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm2 = x * x + y * y + z * z;
        if (norm2 - 1.0).abs() > tol::ALGEBRAIC {
            return Err(Error::NonUnitDirection(norm2));
        }
        Ok(Self { x, y, z })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = (x * x + y * y + z * z).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroDirection);
        }
        Self::new(x / norm, y / norm, z / norm)
    }

    pub fn axis(axis: Axis) -> Self {
        match axis {
            Axis::X => Self { x: 1.0, y: 0.0, z: 0.0 },
            Axis::Y => Self { x: 0.0, y: 1.0, z: 0.0 },
            Axis::Z => Self { x: 0.0, y: 0.0, z: 1.0 },
        }
    }

    /// Uniformly distributed on the sphere.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v: [f64; 3] = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            if n2 > 1e-6 && n2 <= 1.0 {
                if let Ok(d) = Self::normalized(v[0], v[1], v[2]) {
                    return d;
                }
            }
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }
}

impl Neg for BlochDirection {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

fn check_finite<'a>(entries: impl IntoIterator<Item = &'a C64>) -> Result<()> {
    if entries
        .into_iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
    {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

macro_rules! operator_common {
    ($name:ident, $mat:ident) => {
        impl $name {
            pub fn from_matrix(m: $mat<C64>) -> Result<Self> {
                check_finite(m.iter())?;
                Ok(Self(m))
            }

            pub fn identity() -> Self {
                Self($mat::identity())
            }

            pub fn zero() -> Self {
                Self($mat::zeros())
            }

            pub fn matrix(&self) -> &$mat<C64> {
                &self.0
            }

            pub fn get(&self, row: usize, col: usize) -> C64 {
                self.0[(row, col)]
            }

            pub fn adjoint(&self) -> Self {
                Self(self.0.adjoint())
            }

            pub fn trace(&self) -> C64 {
                self.0.trace()
            }

            pub fn scale(&self, factor: f64) -> Self {
                Self(self.0 * C64::new(factor, 0.0))
            }

            /// Largest entrywise modulus of `self - other`.
            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                (self.0 - other.0)
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max)
            }

            /// Largest entrywise modulus of `M - M†`.
            pub fn hermiticity_defect(&self) -> f64 {
                self.max_abs_diff(&self.adjoint())
            }

            pub fn is_hermitian(&self, tol: f64) -> bool {
                self.hermiticity_defect() <= tol
            }

            /// Idempotent and Hermitian.
            pub fn is_projector(&self, tol: f64) -> bool {
                self.is_hermitian(tol) && (*self * *self).max_abs_diff(self) <= tol
            }
        }

        impl Add for $name {
            type Output = Self;

            fn add(self, rhs: Self) -> Self {
                Self(self.0 + rhs.0)
            }
        }

        impl Sub for $name {
            type Output = Self;

            fn sub(self, rhs: Self) -> Self {
                Self(self.0 - rhs.0)
            }
        }

        impl Mul for $name {
            type Output = Self;

            fn mul(self, rhs: Self) -> Self {
                Self(self.0 * rhs.0)
            }
        }

        impl Neg for $name {
            type Output = Self;

            fn neg(self) -> Self {
                Self(-self.0)
            }
        }
    };
}

/// A 2×2 complex operator on a single qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operator2(Matrix2<C64>);

/// A 4×4 complex operator on the pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operator4(Matrix4<C64>);

operator_common!(Operator2, Matrix2);
operator_common!(Operator4, Matrix4);

impl Operator2 {
    /// Components `(a0, [vx, vy, vz])` of `a0·𝕀 + v·σ`, for a Hermitian operator.
    pub fn pauli_components(&self) -> (f64, [f64; 3]) {
        let m = &self.0;
        let a0 = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
        let vx = 0.5 * (m[(0, 1)].re + m[(1, 0)].re);
        let vy = 0.5 * (m[(1, 0)].im - m[(0, 1)].im);
        let vz = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
        (a0, [vx, vy, vz])
    }

    /// `a0·𝕀 + v·σ`.
    pub fn from_pauli_components(a0: f64, v: [f64; 3]) -> Self {
        let a = C64::new(a0, 0.0);
        Self(
            Matrix2::new(ONE, ZERO, ZERO, ONE) * a
                + pauli(Axis::X).0 * C64::new(v[0], 0.0)
                + pauli(Axis::Y).0 * C64::new(v[1], 0.0)
                + pauli(Axis::Z).0 * C64::new(v[2], 0.0),
        )
    }

    /// Eigenvalues `(low, high)` of a Hermitian 2×2 operator, in closed form.
    pub fn hermitian_eigenvalues(&self) -> Result<(f64, f64)> {
        let defect = self.hermiticity_defect();
        if defect > tol::ALGEBRAIC {
            return Err(Error::NotHermitian(defect));
        }
        let (a0, v) = self.pauli_components();
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        Ok((a0 - r, a0 + r))
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        match self.hermitian_eigenvalues() {
            Ok((low, _)) => low >= -tol,
            Err(_) => false,
        }
    }
}

impl Operator4 {
    /// Real eigenvalues of a Hermitian 4×4 operator, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<[f64; 4]> {
        let defect = self.hermiticity_defect();
        if defect > tol::ALGEBRAIC {
            return Err(Error::NotHermitian(defect));
        }
        let herm = (self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let eig = herm.symmetric_eigenvalues();
        let mut out = [eig[0], eig[1], eig[2], eig[3]];
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    /// `M + tol·𝕀` admits a Cholesky factorization iff the smallest
    /// eigenvalue of the Hermitian part exceeds `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol::ALGEBRAIC) {
            return false;
        }
        let shifted = (self.0 + self.0.adjoint()) * C64::new(0.5, 0.0)
            + Matrix4::identity() * C64::new(tol, 0.0);
        cholesky_succeeds(&shifted)
    }
}

/// Hermitian Cholesky with real pivots; fails on the first non-positive pivot.
fn cholesky_succeeds(m: &Matrix4<C64>) -> bool {
    let mut l = Matrix4::<C64>::zeros();
    for j in 0..4 {
        let d = m[(j, j)].re - (0..j).map(|k| l[(j, k)].norm_sqr()).sum::<f64>();
        if d.is_nan() || d <= 0.0 {
            return false;
        }
        let pivot = d.sqrt();
        l[(j, j)] = C64::new(pivot, 0.0);
        for i in j + 1..4 {
            let mut acc = m[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / pivot;
        }
    }
    true
}

/// Standard Pauli matrix.
pub fn pauli(axis: Axis) -> Operator2 {
    match axis {
        Axis::X => Operator2(Matrix2::new(ZERO, ONE, ONE, ZERO)),
        Axis::Y => Operator2(Matrix2::new(ZERO, -I, I, ZERO)),
        Axis::Z => Operator2(Matrix2::new(ONE, ZERO, ZERO, -ONE)),
    }
}

/// `n̂·σ`.
pub fn dir_op(n: &BlochDirection) -> Operator2 {
    Operator2(Matrix2::new(
        C64::new(n.z, 0.0),
        C64::new(n.x, -n.y),
        C64::new(n.x, n.y),
        C64::new(-n.z, 0.0),
    ))
}

/// `(𝕀 + s·n̂·σ)/2` for outcome sign `s`.
pub fn sharp_projector(n: &BlochDirection, outcome: Outcome) -> Operator2 {
    let s = 0.5 * outcome.sign();
    Operator2::from_pauli_components(0.5, [s * n.x, s * n.y, s * n.z])
}

/// `a ⊗ b`, Alice first.
pub fn kron(a: &Operator2, b: &Operator2) -> Operator4 {
    Operator4(a.0.kronecker(&b.0))
}

/// Embeds a single-qubit operator on the given wing.
pub fn lift(op: &Operator2, wing: Wing) -> Operator4 {
    match wing {
        Wing::Alice => kron(op, &Operator2::identity()),
        Wing::Bob => kron(&Operator2::identity(), op),
    }
}

/// The singlet `(|01⟩ − |10⟩)/√2`.
pub fn singlet() -> DensityMatrix4 {
    let mut m = Matrix4::zeros();
    m[(1, 1)] = C64::new(0.5, 0.0);
    m[(2, 2)] = C64::new(0.5, 0.0);
    m[(1, 2)] = C64::new(-0.5, 0.0);
    m[(2, 1)] = C64::new(-0.5, 0.0);
    DensityMatrix4(m)
}

/// `tr[ρ·obs]` for Hermitian `obs`.
pub fn expectation(rho: &DensityMatrix4, obs: &Operator4) -> Result<f64> {
    let defect = obs.hermiticity_defect();
    if defect > tol::ALGEBRAIC {
        return Err(Error::NotHermitian(defect));
    }
    let mut acc = ZERO;
    for i in 0..4 {
        for j in 0..4 {
            acc += rho.0[(i, j)] * obs.0[(j, i)];
        }
    }
    if acc.im.abs() >= tol::SPECTRAL {
        return Err(Error::ComplexExpectation(acc.im));
    }
    Ok(acc.re)
}

/// The unique PSD square root of a Hermitian PSD 2×2 operator.
pub fn hermitian_sqrt(a: &Operator2) -> Result<Operator2> {
    let (low, high) = a.hermitian_eigenvalues()?;
    if low < -tol::SPECTRAL {
        return Err(Error::NotPsd(low));
    }
    let (a0, v) = a.pauli_components();
    let r = 0.5 * (high - low);
    let s_hi = high.max(0.0).sqrt();
    let s_lo = low.max(0.0).sqrt();
    if r == 0.0 {
        return Ok(Operator2::from_pauli_components(a0.max(0.0).sqrt(), [0.0; 3]));
    }
    let k = 0.5 * (s_hi - s_lo) / r;
    Ok(Operator2::from_pauli_components(
        0.5 * (s_hi + s_lo),
        [k * v[0], k * v[1], k * v[2]],
    ))
}

/// A two-qubit density matrix: Hermitian, unit trace, PSD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix4(Matrix4<C64>);

impl DensityMatrix4 {
    /// Validates Hermiticity (1e-12), unit trace (1e-12) and
    /// positivity (eigenvalues ≥ −1e-10).
    pub fn new(m: Matrix4<C64>) -> Result<Self> {
        check_finite(m.iter())?;
        let op = Operator4(m);
        let defect = op.hermiticity_defect();
        if defect > tol::ALGEBRAIC {
            return Err(Error::NotHermitian(defect));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > tol::ALGEBRAIC || tr.im.abs() > tol::ALGEBRAIC {
            return Err(Error::InvalidTrace(tr.re));
        }
        if !op.is_psd(tol::SPECTRAL) {
            let low = op.hermitian_eigenvalues()?[0];
            return Err(Error::NotPsd(low));
        }
        // Store the exactly Hermitian part so rounding does not accumulate.
        Ok(Self((m + m.adjoint()) * C64::new(0.5, 0.0)))
    }

    pub fn from_operator(op: &Operator4) -> Result<Self> {
        Self::new(op.0)
    }

    /// `|ψ⟩⟨ψ|` for a normalized (or normalizable) state vector.
    pub fn from_pure(psi: [C64; 4]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2.is_nan() || norm2 <= 0.0 {
            return Err(Error::InvalidTrace(norm2));
        }
        let mut m = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = psi[i] * psi[j].conj() / norm2;
            }
        }
        Self::new(m)
    }

    /// Random mixed state from the Hilbert–Schmidt ensemble `GG†/tr(GG†)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let g = Matrix4::from_fn(|_, _| {
                C64::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            });
            let w = g * g.adjoint();
            let tr = w.trace().re;
            if tr > 1e-6 {
                if let Ok(rho) = Self::new(w / C64::new(tr, 0.0)) {
                    return rho;
                }
            }
        }
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn as_operator(&self) -> Operator4 {
        Operator4(self.0)
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        self.as_operator()
            .hermitian_eigenvalues()
            .expect("density matrix is Hermitian")
    }

    /// Reduced state of one wing.
    pub fn reduced(&self, wing: Wing) -> Operator2 {
        let mut out = Matrix2::zeros();
        for r in 0..2 {
            for c in 0..2 {
                out[(r, c)] = match wing {
                    Wing::Alice => self.0[(2 * r, 2 * c)] + self.0[(2 * r + 1, 2 * c + 1)],
                    Wing::Bob => self.0[(r, c)] + self.0[(2 + r, 2 + c)],
                };
            }
        }
        Operator2(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.as_operator().max_abs_diff(&other.as_operator())
    }

    /// Re-checks all three invariants.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.0).map(|_| ())
    }
}

/// `K ρ K†` without normalization.
pub(crate) fn sandwich(k: &Operator4, rho: &Matrix4<C64>) -> Matrix4<C64> {
    k.0 * rho * k.0.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn diag2(a: f64, b: f64) -> Operator2 {
        Operator2::from_matrix(Matrix2::new(
            C64::new(a, 0.0),
            ZERO,
            ZERO,
            C64::new(b, 0.0),
        ))
        .unwrap()
    }

    #[test]
    fn pauli_basics() {
        assert_eq!(pauli(Axis::Z), diag2(1.0, -1.0));
        let x = pauli(Axis::X);
        assert!((x * x).max_abs_diff(&Operator2::identity()) < 1e-15);
        assert!((pauli(Axis::X) * pauli(Axis::Z)).trace().norm() < 1e-15);
        for a in [Axis::X, Axis::Y, Axis::Z] {
            let p = pauli(a);
            assert!(p.is_hermitian(0.0));
            assert!(p.trace().norm() == 0.0);
        }
    }

    #[test]
    fn dir_op_examples() {
        let z = BlochDirection::axis(Axis::Z);
        assert_eq!(dir_op(&z), diag2(1.0, -1.0));
        let d = BlochDirection::normalized(1.0, 0.0, 1.0).unwrap();
        let (lo, hi) = dir_op(&d).hermitian_eigenvalues().unwrap();
        assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        assert!((dir_op(&-d) + dir_op(&d)).max_abs_diff(&Operator2::zero()) == 0.0);
    }

    #[test]
    fn non_unit_direction_rejected() {
        assert!(matches!(
            BlochDirection::new(1.0, 1.0, 0.0),
            Err(Error::NonUnitDirection(_))
        ));
        assert!(matches!(
            BlochDirection::normalized(0.0, 0.0, 0.0),
            Err(Error::ZeroDirection)
        ));
        assert!(BlochDirection::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn projector_examples() {
        let z = BlochDirection::axis(Axis::Z);
        assert_eq!(sharp_projector(&z, Outcome::Plus), diag2(1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = BlochDirection::random(&mut rng);
            let p = sharp_projector(&n, Outcome::Plus);
            let m = sharp_projector(&n, Outcome::Minus);
            assert!((p + m).max_abs_diff(&Operator2::identity()) < 1e-12);
            assert!(p.is_projector(1e-12));
            assert!(m.is_projector(1e-12));
        }
        assert!(!diag2(0.9, 0.1).is_projector(1e-12));
    }

    #[test]
    fn kron_ordering_alice_first() {
        let k = kron(&diag2(1.0, -1.0), &Operator2::identity());
        let diag: Vec<f64> = (0..4).map(|i| k.get(i, i).re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
        assert_eq!(
            kron(&Operator2::identity(), &Operator2::identity()),
            Operator4::identity()
        );
        assert_eq!(lift(&pauli(Axis::Z), Wing::Alice), k);
    }

    #[test]
    fn kron_trace_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = Operator2::from_pauli_components(
                rng.random_range(-1.0..1.0),
                [rng.random(), rng.random(), rng.random()],
            );
            let b = Operator2::from_pauli_components(
                rng.random_range(-1.0..1.0),
                [rng.random(), rng.random(), rng.random()],
            );
            let lhs = kron(&a, &b).trace();
            let rhs = a.trace() * b.trace();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn singlet_examples() {
        let rho = singlet();
        rho.validate().unwrap();
        let z = dir_op(&BlochDirection::axis(Axis::Z));
        let x = dir_op(&BlochDirection::axis(Axis::X));
        assert!((expectation(&rho, &kron(&z, &z)).unwrap() + 1.0).abs() < 1e-15);
        assert!(expectation(&rho, &kron(&x, &z)).unwrap().abs() < 1e-15);
        assert!((expectation(&rho, &Operator4::identity()).unwrap() - 1.0).abs() < 1e-15);
        let ev = rho.eigenvalues();
        assert!((ev[3] - 1.0).abs() < 1e-12);
        assert!(ev[..3].iter().all(|e| e.abs() < 1e-12));
        // Alice |1⟩ paired with Bob |0⟩ sits at index 2
        assert!((rho.get(2, 2).re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn singlet_chsh_setting_correlation() {
        let x = BlochDirection::axis(Axis::X);
        let y1 = BlochDirection::normalized(-1.0, 0.0, -1.0).unwrap();
        let obs = kron(&dir_op(&x), &dir_op(&y1));
        let e = expectation(&singlet(), &obs).unwrap();
        assert!((e - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((e + x.dot(&y1)).abs() < 1e-12);
    }

    #[test]
    fn expectation_rejects_non_hermitian() {
        let mut m = Matrix4::identity();
        m[(0, 1)] = C64::new(0.3, 0.0);
        let obs = Operator4::from_matrix(m).unwrap();
        assert!(matches!(
            expectation(&singlet(), &obs),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(
            hermitian_sqrt(&Operator2::identity()).unwrap(),
            Operator2::identity()
        );
        let s = hermitian_sqrt(&diag2(4.0, 1.0)).unwrap();
        assert!(s.max_abs_diff(&diag2(2.0, 1.0)) < 1e-15);
        let e = diag2(0.8, 0.2);
        let s = hermitian_sqrt(&e).unwrap();
        assert!(s.max_abs_diff(&diag2(0.8f64.sqrt(), 0.2f64.sqrt())) < 1e-15);
        assert!(matches!(
            hermitian_sqrt(&diag2(1.0, -0.5)),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn corrupted_states_rejected() {
        let base = *singlet().matrix();

        let mut m = base;
        m[(0, 1)] = C64::new(1e-6, 0.0);
        assert!(matches!(DensityMatrix4::new(m), Err(Error::NotHermitian(_))));

        let m = base * C64::new(1.01, 0.0);
        assert!(matches!(DensityMatrix4::new(m), Err(Error::InvalidTrace(_))));

        // diag(1.5, -0.5, 0, 0): unit trace but negative eigenvalue
        let mut m = Matrix4::zeros();
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(matches!(DensityMatrix4::new(m), Err(Error::NotPsd(_))));

        let mut m = base;
        m[(3, 3)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(DensityMatrix4::new(m), Err(Error::NonFinite)));
    }

    #[test]
    fn reduced_states_of_singlet_are_maximally_mixed() {
        let half = Operator2::identity().scale(0.5);
        assert!(singlet().reduced(Wing::Alice).max_abs_diff(&half) < 1e-15);
        assert!(singlet().reduced(Wing::Bob).max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn psd_predicates_agree_with_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let rho = DensityMatrix4::random(&mut rng);
            let op = rho.as_operator();
            assert!(op.is_psd(1e-10));
            let shifted = op - Operator4::identity().scale(rho.eigenvalues()[0] + 1e-6);
            assert!(!shifted.is_psd(1e-10));
        }
    }
}
