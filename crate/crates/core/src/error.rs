//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("attribute schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid attribute: {0}")]
    InvalidAttribute(String),

    #[error("no feature prototype stored for category {0}")]
    MissingPrototype(usize),

    #[error("feature prototype for category {0} is frozen and cannot be overwritten")]
    FrozenPrototype(usize),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid stage plan: {0}")]
    InvalidPlan(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for CoreError {
    fn from(e: serde_json::Error) -> Self {
        CoreError::Format(e.to_string())
    }
}
