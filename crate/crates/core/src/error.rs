use thiserror::Error;

/// Errors raised by the library. The CLI maps each variant to an exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data that violates a model invariant.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// An operation was called on input outside its precondition.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// A numeric argument is outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A construction or exact routine would exceed its size or float range.
    #[error("size limit exceeded: {0}")]
    Size(String),
    /// No constant in the search range satisfied the calibration target.
    #[error("calibration failed: {0}")]
    Calibration(String),
    /// A guarantee that should always hold did not.
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
