#[derive(Debug, thiserror::Error)]
pub enum NnetError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid model configuration: {0}")]
    Config(String),

    #[error("non-finite loss {value} at step {step}")]
    NonFiniteLoss { value: f64, step: u64 },

    #[error("non-finite gradient for parameter {param} at step {step}")]
    NonFiniteGradient { param: String, step: u64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnetError>;
