use thiserror::Error;

#[derive(Debug, Error)]
pub enum FncError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("null CDF saturated at index {index} (F0(x) = {value})")]
    Saturation { index: usize, value: f64 },

    #[error("covariance decomposition failed: {0}")]
    Decomposition(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The proportion estimate is zero, so there is nothing to screen for.
    #[error("no detectable signal: estimated signal proportion is zero")]
    NoDetectableSignal,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FncError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(FncError::Domain(msg.into()))
}
