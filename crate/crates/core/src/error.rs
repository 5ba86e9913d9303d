use thiserror::Error;

/// Errors raised by state construction, measurement and scenario evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("direction is not a unit vector (|n|^2 = {0})")]
    NonUnitDirection(f64),

    #[error("direction has zero length")]
    ZeroDirection,

    #[error("operator is not Hermitian (max |M - M^dagger| = {0})")]
    NotHermitian(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("operator is not positive semi-definite (eigenvalue {0})")]
    NotPsd(f64),

    #[error("expectation value has imaginary residue {0}")]
    ComplexExpectation(f64),

    #[error("sharpness {0} outside [0, 1]")]
    SharpnessOutOfRange(f64),

    #[error("pointer quality (F = {quality}, G = {precision}) is not attainable")]
    UnattainablePointer { quality: f64, precision: f64 },

    #[error("conditioning on null event (outcome probability {0})")]
    NullEvent(f64),

    #[error("scenario needs at least one observer")]
    EmptyChain,

    #[error("input weights ({0}, {1}) are not a probability pair")]
    InvalidWeights(f64, f64),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("CHSH value {0} exceeds the Tsirelson bound")]
    TsirelsonViolation(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
