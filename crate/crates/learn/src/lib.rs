//! Losses over sketch and photo embeddings, quadruplet formation and the
//! three-stage training procedure.

pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod sampler;
pub mod train;

pub use data::{embed, ImageBank};
pub use error::{LearnError, Result};
pub use losses::{
    contrastive_loss, cross_entropy, quadruplet_losses, triplet_loss, QuadrupletLossParams, ALPHA_GRID,
    DEFAULT_LAMBDA,
};
pub use metrics::{ordering_stats, EpochMetrics, OrderingStats};
pub use sampler::{check_quadruplet, form_quadruplet, Quadruplet, QuadrupletSampler};
pub use train::{beta_schedule, fixed_quadruplets, train_stage, StageConfig, StageOutcome, TrainInputs};
