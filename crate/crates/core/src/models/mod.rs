//! The generator, discriminator and frozen feature network.

pub mod discriminator;
pub mod feature;
pub mod generator;
pub mod layers;

pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use feature::{FeatureActivation, FeatureLayerSpec, FeatureNet, FeatureNetSpec, WeightSource};
pub use generator::{Generator, GeneratorConfig};

use crate::error::{Error, Result, TensorMismatch};
use crate::tensor::{Parameter, Tensor};

/// Which network a checkpoint holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkKind {
    Generator,
    Discriminator,
    FeatureNet,
}

impl NetworkKind {
    pub fn code(self) -> u8 {
        match self {
            NetworkKind::Generator => 0,
            NetworkKind::Discriminator => 1,
            NetworkKind::FeatureNet => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(NetworkKind::Generator),
            1 => Ok(NetworkKind::Discriminator),
            2 => Ok(NetworkKind::FeatureNet),
            other => Err(Error::Checkpoint(format!("unknown network kind code {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NetworkKind::Generator => "generator",
            NetworkKind::Discriminator => "discriminator",
            NetworkKind::FeatureNet => "featurenet",
        }
    }
}

/// Common introspection over a network's named tensors.
pub trait Network {
    fn kind(&self) -> NetworkKind;

    /// Architecture description as TOML text.
    fn config_text(&self) -> String;

    fn params(&self) -> Vec<&Parameter>;

    fn params_mut(&mut self) -> Vec<&mut Parameter>;

    /// Non-learnable state that still affects the forward pass.
    fn buffers(&self) -> Vec<(String, &Tensor)> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        Vec::new()
    }

    /// Total number of learnable scalars.
    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.numel()).sum()
    }

    fn zero_grads(&mut self) {
        self.params_mut().into_iter().for_each(Parameter::zero_grad);
    }

    /// Every parameter value and buffer, in a stable order.
    fn named_tensors(&self) -> Vec<(String, Tensor)> {
        self.params()
            .into_iter()
            .map(|p| (p.name.clone(), p.value.clone()))
            .chain(self.buffers().into_iter().map(|(n, t)| (n, t.clone())))
            .collect()
    }

    /// Copies values by name. Fails without modifying anything when a name is
    /// missing, unexpected or differently shaped.
    fn load_named_tensors(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        let mut mismatch = TensorMismatch::default();
        let own = self.named_tensors();
        for (name, value) in &own {
            match tensors.iter().find(|(n, _)| n == name) {
                None => mismatch.missing.push(name.clone()),
                Some((_, t)) if t.shape() != value.shape() => mismatch.reshaped.push(name.clone()),
                Some(_) => {}
            }
        }
        for (name, _) in tensors {
            if !own.iter().any(|(n, _)| n == name) {
                mismatch.unexpected.push(name.clone());
            }
        }
        if !mismatch.is_empty() {
            return Err(Error::TensorMismatch(mismatch));
        }
        let lookup = |name: &str| &tensors.iter().find(|(n, _)| n == name).unwrap().1;
        for p in self.params_mut() {
            p.value = lookup(&p.name).clone();
        }
        for (name, t) in self.buffers_mut() {
            *t = lookup(&name).clone();
        }
        Ok(())
    }
}
