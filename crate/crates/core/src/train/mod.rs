//! BPR training: negative sampling, loss, Adam and epoch orchestration.

pub mod adam;
pub mod gradcheck;
pub mod loss;
pub mod sampler;
pub mod trainer;

pub use adam::{Adam, AdamConfig};
pub use loss::{bpr_loss, record_bpr_loss, Batch};
pub use sampler::NegativeSampler;
pub use trainer::{
    batch_loss, fit, loss_and_gradients, EpochRecord, EpochStats, FitOutcome, TrainConfig, Trainer, BATCH_SIZE_GRID,
    L2_GRID, LEARNING_RATE_GRID,
};
