//! Optimizer, schedules and training loops.

pub mod adam;
pub mod config;
pub mod log;
pub mod loops;

pub use adam::{adam_step, AdamSettings};
pub use config::{lr_at_epoch, TrainConfig};
pub use log::{TrainLog, TrainRecord, CSV_HEADER};
pub use loops::{
    dataset_mse, dataset_psnr, discriminator_step, epoch_batches, pretrain, steps_per_epoch, train_gan, transfer_from_checkpoint,
    transfer_init, CheckpointPlan, RunOptions, TrainOutcome,
};
