//! Multi-frame video super-resolution with a residual generator, a patch
//! discriminator and a perceptual feature loss, all on a small f64 tensor core
//! with hand-written backward passes.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod grad_suite;
pub mod gradcheck;
pub mod kernels;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod plot;
pub mod tensor;
pub mod training;

pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use models::{Discriminator, DiscriminatorConfig, FeatureNet, FeatureNetSpec, Generator, GeneratorConfig, Network};
pub use tensor::{Parameter, Tensor};
