use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the domain of a distribution or operation.
    #[error("parameter domain error: {0}")]
    Domain(String),

    /// A user-supplied value failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// The requested computation exceeds the configured capacity limits.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// An estimate cannot be formed (e.g. empty sample set).
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Too many MCMC analyses failed the convergence diagnostic.
    #[error("non-convergence threshold exceeded: {0}")]
    NonConvergence(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// A persisted file does not have the expected layout.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
