use sqnet_nnet::NnetError;

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("item {item}: instance {instance} has no sibling with a different color group")]
    NoColorSibling { item: u64, instance: u64 },

    #[error("catalog has fewer than two classes")]
    SingleClass,

    #[error("no image loaded for item {0}")]
    MissingImage(u64),

    #[error("stage {stage}, epoch {epoch}: {source}")]
    Training {
        stage: u8,
        epoch: usize,
        #[source]
        source: NnetError,
    },

    #[error(transparent)]
    Nnet(#[from] NnetError),

    #[error(transparent)]
    Core(#[from] sqnet_core::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LearnError>;
