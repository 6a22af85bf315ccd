//! Run configuration files (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{DiscriminatorConfig, FeatureNetSpec, GeneratorConfig};
use crate::training::TrainConfig;

/// Environment variable naming the directory that relative dataset paths are
/// resolved against.
pub const DATA_DIR_ENV: &str = "VSRGAN_DATA_DIR";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<PathBuf>,
}

/// Everything a training or evaluation run needs. Every section is optional
/// and falls back to its defaults; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    /// Seed for network initialization (shuffling uses `training.seed`).
    pub seed: u64,
    pub data: DataPaths,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub feature_net: FeatureNetSpec,
    pub training: TrainConfig,
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfigFile = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.feature_net.validate()?;
        self.training.validate()?;
        if self.discriminator.input_size != self.generator.patch_size {
            return Err(Error::config(format!(
                "discriminator input_size {} differs from generator patch_size {}",
                self.discriminator.input_size, self.generator.patch_size
            )));
        }
        Ok(())
    }
}

/// Resolves a relative dataset path against `$VSRGAN_DATA_DIR` when set.
pub fn resolve_data_path(path: &Path) -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}
