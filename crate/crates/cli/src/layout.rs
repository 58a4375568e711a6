//! File layout of a data directory.

use std::path::{Path, PathBuf};

pub const DATA_DIR_ENV: &str = "SQNET_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// `SQNET_DATA_DIR` if set, otherwise `data/`.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_DATA_DIR), PathBuf::from))
    }

    /// Working photo catalog. Image paths inside are relative to `root`.
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.tsv")
    }

    pub fn sketch(&self, id: u64) -> PathBuf {
        self.root.join("sketches").join(format!("{id:06}.png"))
    }

    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    /// `stage{n}.sqnm`, or `stage3_alpha{a}.sqnm` when `alpha` is given.
    pub fn checkpoint(&self, stage: u8, alpha: Option<f64>) -> PathBuf {
        self.models().join(format!("{}.sqnm", stage_stem(stage, alpha)))
    }

    pub fn training_log(&self, stage: u8, alpha: Option<f64>) -> PathBuf {
        self.models().join(format!("{}.jsonl", stage_stem(stage, alpha)))
    }

    pub fn index(&self) -> PathBuf {
        self.root.join("index")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
}

fn stage_stem(stage: u8, alpha: Option<f64>) -> String {
    match alpha {
        Some(a) => format!("stage{stage}_alpha{a}"),
        None => format!("stage{stage}"),
    }
}

/// Model checkpoints copied next to an index, so the index directory alone
/// answers queries.
pub fn index_qnet_model(index_dir: &Path) -> PathBuf {
    index_dir.join("qnet.sqnm")
}

pub fn index_shape_model(index_dir: &Path) -> PathBuf {
    index_dir.join("shape.sqnm")
}

