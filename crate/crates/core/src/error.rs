use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("event data length {len} is not a multiple of the 5-byte record size")]
    TruncatedRecord { len: usize },
    #[error("record {index}: coordinate ({x}, {y}) outside the sensor")]
    CoordinateOutOfRange { index: usize, x: u32, y: u32 },
    #[error("event {index}: timestamp {t} does not fit in 23 bits")]
    TimestampOverflow { index: usize, t: u64 },
    #[error("event {index}: coordinate ({x}, {y}) does not fit in one byte")]
    CoordinateOverflow { index: usize, x: u32, y: u32 },
    #[error("shape mismatch: expected {expected} elements, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("frame timestamps must be strictly increasing (index {index})")]
    NonMonotonicTimestamps { index: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("volume at ({x}, {y}, interval {interval}) exceeds the grid")]
    OutOfBounds { x: usize, y: usize, interval: usize },
    #[error("could not draw enough non-empty volumes ({drawn} of {requested})")]
    InsufficientData { drawn: usize, requested: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("empty input")]
    EmptyInput,
    #[error("covariance is singular and epsilon is zero")]
    SingularCovariance,
    #[error("atom {atom} is not unit norm")]
    NotNormalized { atom: usize },
    #[error("Gram matrix is singular, log-determinant undefined")]
    SingularGram,
    #[error("V V^T + regularizer is not positive definite")]
    SingularFactor,
    #[error("need at least two classes with one example each")]
    DegenerateLabels,
    #[error("too few examples ({examples}) for {folds} folds")]
    TooFewExamples { examples: usize, folds: usize },
    #[error("no volume fits on the extraction lattice")]
    EmptyLattice,
}
