use thiserror::Error;

/// Unified error type for model construction, evaluation, and reporting.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter definition: {0}")]
    InvalidParam(String),

    #[error("invalid sample stack: {0}")]
    InvalidStack(String),

    #[error("parameter {0} is not bound to any stack field")]
    UnboundParameter(String),

    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveValue { name: String, value: f64 },

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("forward model failure: {0}")]
    Forward(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("measurement data error: {0}")]
    InvalidData(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CoreError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
