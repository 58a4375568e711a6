use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid image: {0}")]
    Image(String),

    #[error("manifest {path}:{line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("duplicate item id {0} in catalog")]
    DuplicateId(u64),

    #[error("missing image file for item {id}: {path}")]
    MissingImage { id: u64, path: PathBuf },

    #[error("split: {0}")]
    Split(String),

    #[error("histogram layout mismatch: {0:?} vs {1:?}")]
    LayoutMismatch(
        crate::colorfeat::HistLayout,
        crate::colorfeat::HistLayout,
    ),

    #[error("{0}")]
    Format(String),

    #[error("png codec: {0}")]
    Codec(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
