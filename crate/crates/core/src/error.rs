use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid block partition: {0}")]
    InvalidPartition(String),
    #[error("mask is 1 at ({row}, {col}) inside the structurally missing block")]
    StructuredBlockViolation { row: usize, col: usize },
    #[error("observed entry at ({row}, {col}) is not finite")]
    NonFiniteObservation { row: usize, col: usize },
    #[error("Jacobi SVD did not converge within {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },
    #[error("leading {size}x{size} submatrix is numerically singular")]
    SingularSubmatrix { size: usize },
    #[error("observable {axis} {index} has no observed entries")]
    EmptyRowOrColumn { axis: &'static str, index: usize },
    #[error("mask strip has zero total mass")]
    ZeroTotalMass,
    #[error("column {col} has no observed entries")]
    EmptyColumn { col: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("structured block of {requested} exceeds dimension {available}")]
    BlockTooLarge { requested: usize, available: usize },
    #[error("Poisson intensity must be nonnegative, found {0}")]
    NegativeIntensity(f64),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("target entries have zero true norm")]
    ZeroTruthNorm,
}

pub type Result<T> = std::result::Result<T, Error>;
