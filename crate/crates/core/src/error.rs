use thiserror::Error;

/// Errors produced by the library. Usage errors (bad dimensions, invalid
/// parameters) are distinguished from numerical failures so callers can map
/// them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("replica diverged at t = {t}: state became non-finite")]
    Diverged { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
