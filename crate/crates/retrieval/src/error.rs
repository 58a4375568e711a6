#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("unknown retrieval method {0:?}; expected qnet, baseline1 or baseline2")]
    UnknownMethod(String),

    #[error("parameter {name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("index was built without baseline features")]
    NoBaselines,

    #[error("query embedding has dimension {got}, index holds {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("embedding store: {0}")]
    Store(String),

    #[error("duplicate item id {0} in index")]
    DuplicateId(u64),

    #[error(transparent)]
    Core(#[from] sqnet_core::Error),

    #[error(transparent)]
    Nnet(#[from] sqnet_nnet::NnetError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RetrievalError>;
