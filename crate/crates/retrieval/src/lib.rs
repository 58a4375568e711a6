//! Photo index over learned and histogram features, with exhaustive
//! ranking for the learned model and the two fusion baselines.

pub mod error;
pub mod fusion;
pub mod index;
pub mod query;
pub mod search;
pub mod store;

pub use error::{Result, RetrievalError};
pub use fusion::{fused_distance, fused_similarity_geometric};
pub use index::{build_index, BaselineFeatures, IndexManifest, IndexedItem, RetrievalIndex, SkippedItem};
pub use query::{Encoder, PhotoFeatures, QueryFeatures, QueryHistograms};
pub use search::{rank_scores, score_all, search, Method, RankedResult, ScoreKind};
pub use store::EmbeddingIndex;
