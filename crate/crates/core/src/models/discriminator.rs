//! Patch discriminator: strided conv + batch norm + leaky ReLU stages, a dense
//! layer and a sigmoid giving the probability that a patch is real.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, BnMode};
use crate::models::layers::{Activation, BatchNorm2d, Conv2d, Dense};
use crate::models::{Network, NetworkKind};
use crate::tensor::{Parameter, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscriminatorConfig {
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub leaky_slope: f64,
    pub input_size: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            conv_channels: vec![64, 128, 256],
            kernel: 3,
            stride: 2,
            leaky_slope: 0.2,
            input_size: 36,
        }
    }
}

impl DiscriminatorConfig {
    /// Spatial extent after each strided stage, starting with the input.
    pub fn spatial_sizes(&self) -> Vec<usize> {
        let pad = self.kernel / 2;
        let mut sizes = vec![self.input_size];
        for _ in &self.conv_channels {
            let n = *sizes.last().unwrap();
            let padded = n + 2 * pad;
            sizes.push(if padded < self.kernel || self.stride == 0 {
                0
            } else {
                (padded - self.kernel) / self.stride + 1
            });
        }
        sizes
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return Err(Error::config("discriminator needs at least one conv stage with channels >= 1"));
        }
        if self.kernel % 2 == 0 || self.stride == 0 {
            return Err(Error::config("discriminator kernel must be odd and stride >= 1"));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(Error::config("leaky_slope must lie in [0, 1)"));
        }
        if self.spatial_sizes().iter().any(|&s| s == 0) {
            return Err(Error::config(format!(
                "input_size {} collapses to zero through the strided stages",
                self.input_size
            )));
        }
        Ok(())
    }

    fn dense_inputs(&self) -> usize {
        let last = *self.spatial_sizes().last().unwrap();
        self.conv_channels.last().unwrap() * last * last
    }
}

#[derive(Clone, Debug)]
struct Stage {
    conv: Conv2d,
    bn: BatchNorm2d,
    act: Activation,
}

#[derive(Clone, Debug)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    stages: Vec<Stage>,
    fc: Dense,
    stage_out_shape: Option<Vec<usize>>,
    probs: Option<Tensor>,
}

impl Discriminator {
    /// Convolutions carry no bias: the following batch norm cancels it.
    pub fn new(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_ch = 1;
        let stages = config
            .conv_channels
            .iter()
            .enumerate()
            .map(|(i, &out_ch)| {
                let stage = Stage {
                    conv: Conv2d::new(&format!("conv{i}"), in_ch, out_ch, config.kernel, config.stride, false, &mut rng),
                    bn: BatchNorm2d::new(&format!("bn{i}"), out_ch),
                    act: Activation::leaky(config.leaky_slope),
                };
                in_ch = out_ch;
                stage
            })
            .collect();
        let fc = Dense::new("fc", config.dense_inputs(), 1, &mut rng);
        Ok(Discriminator {
            config,
            stages,
            fc,
            stage_out_shape: None,
            probs: None,
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn dense_layer(&self) -> &Dense {
        &self.fc
    }

    pub fn dense_layer_mut(&mut self) -> &mut Dense {
        &mut self.fc
    }

    fn check_input(&self, patch: &Tensor) -> Result<()> {
        let n = self.config.input_size;
        match *patch.shape() {
            [_, 1, h, w] if h == n && w == n => Ok(()),
            _ => Err(Error::shape(format!(
                "discriminator expects (batch, 1, {n}, {n}), got {:?}",
                patch.shape()
            ))),
        }
    }

    /// Eval-mode forward (running statistics) without caching.
    pub fn infer(&self, patch: &Tensor) -> Result<Tensor> {
        self.check_input(patch)?;
        let mut x = patch.clone();
        for s in &self.stages {
            x = s.act.infer(&s.bn.infer(&s.conv.infer(&x)?)?);
        }
        kernels::sigmoid_forward(&self.fc.infer(&x)?)
    }

    /// Returns `(B, 1)` probabilities and caches for [`Discriminator::backward`].
    /// Train mode normalizes with batch statistics and updates the running ones.
    pub fn forward(&mut self, patch: &Tensor, mode: BnMode) -> Result<Tensor> {
        self.check_input(patch)?;
        let mut x = patch.clone();
        for s in &mut self.stages {
            let y = s.conv.forward(x)?;
            let y = s.bn.forward(&y, mode)?;
            x = s.act.forward(y);
        }
        self.stage_out_shape = Some(x.shape().to_vec());
        let logits = self.fc.forward(x)?;
        let probs = kernels::sigmoid_forward(&logits)?;
        self.probs = Some(probs.clone());
        Ok(probs)
    }

    /// Gradient w.r.t. the input patch given the gradient w.r.t. the output
    /// probabilities. Parameter gradients are accumulated.
    pub fn backward(&mut self, grad_probs: &Tensor) -> Result<Tensor> {
        let probs = self
            .probs
            .as_ref()
            .ok_or_else(|| Error::Numeric("discriminator backward without forward".into()))?;
        let g = kernels::sigmoid_backward(grad_probs, probs)?;
        let mut g = self.fc.backward(&g, true)?;
        for s in self.stages.iter_mut().rev() {
            g = s.act.backward(&g)?;
            g = s.bn.backward(&g, true)?;
            g = s.conv.backward(&g, true)?;
        }
        Ok(g)
    }
}

impl Network for Discriminator {
    fn kind(&self) -> NetworkKind {
        NetworkKind::Discriminator
    }

    fn config_text(&self) -> String {
        toml::to_string(&self.config).expect("discriminator config serializes")
    }

    fn params(&self) -> Vec<&Parameter> {
        let mut v = Vec::new();
        for s in &self.stages {
            v.extend(s.conv.params());
            v.push(&s.bn.gamma);
            v.push(&s.bn.beta);
        }
        v.push(&self.fc.weight);
        v.push(&self.fc.bias);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = Vec::new();
        for s in &mut self.stages {
            v.extend(s.conv.params_mut());
            v.push(&mut s.bn.gamma);
            v.push(&mut s.bn.beta);
        }
        v.push(&mut self.fc.weight);
        v.push(&mut self.fc.bias);
        v
    }

    fn buffers(&self) -> Vec<(String, &Tensor)> {
        self.stages
            .iter()
            .flat_map(|s| {
                let [m, v] = s.bn.buffer_names();
                [(m, &s.bn.running.mean), (v, &s.bn.running.var)]
            })
            .collect()
    }

    fn buffers_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        self.stages
            .iter_mut()
            .flat_map(|s| {
                let [m, v] = s.bn.buffer_names();
                let running = &mut s.bn.running;
                [(m, &mut running.mean), (v, &mut running.var)]
            })
            .collect()
    }
}
