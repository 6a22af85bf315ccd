//! Training hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{DistanceKind, GanMode, LossWeights, ObjectiveOptions};
use crate::training::adam::AdamSettings;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub scale: usize,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub lr_drop_epochs: Vec<usize>,
    pub lr_drop_factor: f64,
    pub gan_epochs: usize,
    pub gan_lr: f64,
    pub weight_decay_g: f64,
    pub weight_decay_d: f64,
    pub loss_weights: LossWeights,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub d_steps_per_g_step: usize,
    pub charbonnier_mode: DistanceKind,
    pub gan_mode: GanMode,
    /// Write a checkpoint every this many epochs; 0 writes only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            scale: 2,
            batch_size: 64,
            pretrain_epochs: 100,
            pretrain_lr: 1e-3,
            lr_drop_epochs: vec![50, 75],
            lr_drop_factor: 10.0,
            gan_epochs: 30,
            gan_lr: 1e-4,
            weight_decay_g: 1e-4,
            weight_decay_d: 1e-3,
            loss_weights: LossWeights::default(),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            d_steps_per_g_step: 1,
            charbonnier_mode: DistanceKind::Charbonnier,
            gan_mode: GanMode::Minimax,
            checkpoint_every: 0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive, got {v}")))
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        positive("pretrain_lr", self.pretrain_lr)?;
        positive("gan_lr", self.gan_lr)?;
        positive("adam_eps", self.adam_eps)?;
        if self.lr_drop_factor < 1.0 || !self.lr_drop_factor.is_finite() {
            return Err(Error::config(format!("lr_drop_factor must be >= 1, got {}", self.lr_drop_factor)));
        }
        for (name, v) in [("weight_decay_g", self.weight_decay_g), ("weight_decay_d", self.weight_decay_d)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.d_steps_per_g_step == 0 {
            return Err(Error::config("d_steps_per_g_step must be at least 1"));
        }
        if !self.lr_drop_epochs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config("lr_drop_epochs must be strictly increasing"));
        }
        if let Some(&last) = self.lr_drop_epochs.last() {
            if last >= self.pretrain_epochs {
                return Err(Error::config(format!(
                    "lr drop at epoch {last} is not before pretrain_epochs {}",
                    self.pretrain_epochs
                )));
            }
        }
        if !matches!(self.scale, 1..=4) {
            return Err(Error::config(format!("scale must be 1, 2, 3 or 4, got {}", self.scale)));
        }
        self.loss_weights.validate()
    }

    /// Pretraining rate: `pretrain_lr` divided by `lr_drop_factor` once for
    /// every drop epoch at or before `epoch`.
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let drops = self.lr_drop_epochs.iter().filter(|&&e| e <= epoch).count();
        self.pretrain_lr / self.lr_drop_factor.powi(drops as i32)
    }

    pub fn pretrain_adam(&self, epoch: usize) -> AdamSettings {
        AdamSettings {
            lr: self.lr_at_epoch(epoch),
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            weight_decay: 0.0,
        }
    }

    pub fn generator_gan_adam(&self) -> AdamSettings {
        AdamSettings {
            lr: self.gan_lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay_g,
        }
    }

    pub fn discriminator_adam(&self) -> AdamSettings {
        AdamSettings {
            weight_decay: self.weight_decay_d,
            ..self.generator_gan_adam()
        }
    }

    pub fn objective(&self) -> ObjectiveOptions {
        ObjectiveOptions {
            distance: self.charbonnier_mode,
            gan_mode: self.gan_mode,
        }
    }
}

/// Free-standing form of [`TrainConfig::lr_at_epoch`].
pub fn lr_at_epoch(config: &TrainConfig, epoch: usize) -> f64 {
    config.lr_at_epoch(epoch)
}
