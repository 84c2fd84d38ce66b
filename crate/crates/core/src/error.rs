use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid kernel term {index}: weight {weight} and rate {rate} must both be positive")]
    InvalidKernelTerm { index: usize, weight: f64, rate: f64 },

    #[error("kernel evaluated at negative time {0}")]
    NegativeTime(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exponential fit failed: {0}")]
    FitFailure(String),

    #[error("ill-conditioned sample set: {0}")]
    IllConditioned(String),

    #[error("tridiagonal solver breakdown at row {row}: pivot {pivot:e}")]
    SolverBreakdown { row: usize, pivot: f64 },

    #[error("horizon {horizon} is not an integer multiple of step {tau} (ratio {ratio})")]
    StepCountMismatch { horizon: f64, tau: f64, ratio: f64 },

    #[error("requested {requested} steps exceeds the limit of {limit}")]
    TooManySteps { requested: usize, limit: usize },

    #[error("oracle precondition violated: {0}")]
    OraclePrecondition(String),

    #[error("trajectory mismatch: {0}")]
    TrajectoryMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
