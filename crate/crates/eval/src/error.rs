#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("metric over an empty query set")]
    NoQueries,

    #[error("ranks are 1-based, got {0}")]
    InvalidRank(usize),

    #[error("groundtruth {groundtruth} of query {sketch} is not in the index")]
    MissingGroundtruth { sketch: u64, groundtruth: u64 },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Retrieval(#[from] sqnet_retrieval::RetrievalError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;
