//! Frozen convolutional feature extractor used by the feature-space loss and
//! the perceptual distance.
//!
//! The default stack is four 3x3 conv + ReLU layers with 16/16/32/32 channels
//! and a 2x average pool after the second layer; the outputs of layers 3 and 4
//! are tapped.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::kernels;
use crate::models::layers::{Activation, Conv2d};
use crate::models::{Network, NetworkKind};
use crate::tensor::{Parameter, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureActivation {
    Relu,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureLayerSpec {
    pub out_channels: usize,
    pub activation: FeatureActivation,
    #[serde(default)]
    pub pool_after: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum WeightSource {
    Seeded { seed: u64 },
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureNetSpec {
    pub layers: Vec<FeatureLayerSpec>,
    /// 1-based layer indices whose (post-activation) outputs are emitted.
    pub taps: Vec<usize>,
    #[serde(default = "default_kernel")]
    pub kernel: usize,
    pub weights: WeightSource,
}

fn default_kernel() -> usize {
    3
}

impl Default for FeatureNetSpec {
    fn default() -> Self {
        let layer = |out_channels, pool_after| FeatureLayerSpec {
            out_channels,
            activation: FeatureActivation::Relu,
            pool_after,
        };
        FeatureNetSpec {
            layers: vec![layer(16, false), layer(16, true), layer(32, false), layer(32, false)],
            taps: vec![3, 4],
            kernel: 3,
            weights: WeightSource::Seeded { seed: 42 },
        }
    }
}

/// Architecture-only view of the spec, stored in weight files.
#[derive(Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct FeatureArch {
    layers: Vec<FeatureLayerSpec>,
    taps: Vec<usize>,
    kernel: usize,
}

impl FeatureNetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("feature network needs at least one layer"));
        }
        if self.taps.is_empty() {
            return Err(Error::config("feature network needs at least one tap point"));
        }
        if self.taps.iter().any(|&t| t == 0 || t > self.layers.len()) {
            return Err(Error::config(format!(
                "tap points {:?} must lie in 1..={}",
                self.taps,
                self.layers.len()
            )));
        }
        if !self.taps.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config("tap points must be strictly increasing"));
        }
        if self.kernel % 2 == 0 || self.layers.iter().any(|l| l.out_channels == 0) {
            return Err(Error::config("feature kernel must be odd and channels >= 1"));
        }
        Ok(())
    }

    fn arch(&self) -> FeatureArch {
        FeatureArch {
            layers: self.layers.clone(),
            taps: self.taps.clone(),
            kernel: self.kernel,
        }
    }
}

#[derive(Clone, Debug)]
struct FeatureLayer {
    conv: Conv2d,
    act: Activation,
    relu: bool,
    pool_after: bool,
    pool_input_shape: Option<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct FeatureNet {
    spec: FeatureNetSpec,
    layers: Vec<FeatureLayer>,
}

impl FeatureNet {
    /// Builds the network and initializes weights from the spec's source.
    pub fn new(spec: FeatureNetSpec) -> Result<Self> {
        spec.validate()?;
        let seed = match &spec.weights {
            WeightSource::Seeded { seed } => *seed,
            WeightSource::File { .. } => 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_ch = 1;
        let layers = spec
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let layer = FeatureLayer {
                    conv: Conv2d::new(&format!("layer{}", i + 1), in_ch, l.out_channels, spec.kernel, 1, true, &mut rng),
                    act: Activation::relu(),
                    relu: l.activation == FeatureActivation::Relu,
                    pool_after: l.pool_after,
                    pool_input_shape: None,
                };
                in_ch = l.out_channels;
                layer
            })
            .collect();
        let mut net = FeatureNet { spec, layers };
        if let WeightSource::File { path } = net.spec.weights.clone() {
            let ckpt = Checkpoint::load(&path)?;
            net.load_checkpoint(&ckpt)?;
        }
        Ok(net)
    }

    pub fn spec(&self) -> &FeatureNetSpec {
        &self.spec
    }

    /// Applies a weight file, checking that it describes this architecture.
    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        if ckpt.kind != NetworkKind::FeatureNet {
            return Err(Error::Checkpoint(format!(
                "expected a featurenet weight file, found {}",
                ckpt.kind.name()
            )));
        }
        let arch: FeatureArch = toml::from_str(&ckpt.config)
            .map_err(|e| Error::Checkpoint(format!("bad featurenet config block: {e}")))?;
        if arch != self.spec.arch() {
            return Err(Error::Checkpoint(
                "weight file architecture does not match the feature network spec".into(),
            ));
        }
        self.load_named_tensors(&ckpt.tensors)
    }

    /// Tapped feature maps in layer order, without caching.
    pub fn infer(&self, image: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(image)?;
        let last_tap = *self.spec.taps.last().unwrap();
        let mut taps = Vec::with_capacity(self.spec.taps.len());
        let mut x = image.clone();
        for (i, l) in self.layers.iter().enumerate().take(last_tap) {
            x = l.conv.infer(&x)?;
            if l.relu {
                x = l.act.infer(&x);
            }
            if self.spec.taps.contains(&(i + 1)) {
                taps.push(x.clone());
            }
            if l.pool_after && i + 1 < last_tap {
                x = kernels::avg_pool2_forward(&x)?;
            }
        }
        Ok(taps)
    }

    /// Like [`FeatureNet::infer`] but caches activations for
    /// [`FeatureNet::backward_input`].
    pub fn forward(&mut self, image: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(image)?;
        let last_tap = *self.spec.taps.last().unwrap();
        let mut taps = Vec::with_capacity(self.spec.taps.len());
        let mut x = image.clone();
        for (i, l) in self.layers.iter_mut().enumerate().take(last_tap) {
            x = l.conv.forward(x)?;
            if l.relu {
                x = l.act.forward(x);
            }
            if self.spec.taps.contains(&(i + 1)) {
                taps.push(x.clone());
            }
            if l.pool_after && i + 1 < last_tap {
                l.pool_input_shape = Some(x.shape().to_vec());
                x = kernels::avg_pool2_forward(&x)?;
            }
        }
        Ok(taps)
    }

    /// Gradient w.r.t. the image given one gradient per tap. The weights are
    /// frozen and receive nothing.
    pub fn backward_input(&mut self, tap_grads: &[Tensor]) -> Result<Tensor> {
        if tap_grads.len() != self.spec.taps.len() {
            return Err(Error::shape(format!(
                "expected {} tap gradients, got {}",
                self.spec.taps.len(),
                tap_grads.len()
            )));
        }
        let last_tap = *self.spec.taps.last().unwrap();
        let mut g: Option<Tensor> = None;
        for i in (0..last_tap).rev() {
            let l = &mut self.layers[i];
            if l.pool_after && i + 1 < last_tap {
                let shape = l
                    .pool_input_shape
                    .clone()
                    .ok_or_else(|| Error::Numeric("featurenet backward without forward".into()))?;
                g = Some(kernels::avg_pool2_backward(g.as_ref().unwrap(), &shape)?);
            }
            if let Some(t) = self.spec.taps.iter().position(|&t| t == i + 1) {
                g = Some(match g {
                    None => tap_grads[t].clone(),
                    Some(mut acc) => {
                        acc.add_assign(&tap_grads[t])?;
                        acc
                    }
                });
            }
            let mut cur = g.take().expect("gradient flows from the last tap");
            if l.relu {
                cur = l.act.backward(&cur)?;
            }
            g = Some(l.conv.backward(&cur, false)?);
        }
        Ok(g.expect("at least one layer"))
    }

    fn check_input(&self, image: &Tensor) -> Result<()> {
        match *image.shape() {
            [_, 1, _, _] => Ok(()),
            _ => Err(Error::shape(format!(
                "feature network expects (batch, 1, H, W), got {:?}",
                image.shape()
            ))),
        }
    }
}

impl Network for FeatureNet {
    fn kind(&self) -> NetworkKind {
        NetworkKind::FeatureNet
    }

    fn config_text(&self) -> String {
        toml::to_string(&self.spec.arch()).expect("featurenet arch serializes")
    }

    fn params(&self) -> Vec<&Parameter> {
        self.layers.iter().flat_map(|l| l.conv.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers.iter_mut().flat_map(|l| l.conv.params_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::gradient_check;

    fn image(seed: usize, n: usize) -> Tensor {
        Tensor::from_fn(&[1, 1, n, n], |i| (((i + seed) * 7919) % 257) as f64 / 257.0)
    }

    #[test]
    fn default_tap_shapes() {
        let net = FeatureNet::new(FeatureNetSpec::default()).unwrap();
        let x = Tensor::from_fn(&[2, 1, 36, 36], |i| (i as f64 * 0.1).sin());
        let shapes: Vec<Vec<usize>> = net.infer(&x).unwrap().iter().map(|t| t.shape().to_vec()).collect();
        assert_eq!(shapes, vec![vec![2, 32, 18, 18], vec![2, 32, 18, 18]]);
    }

    #[test]
    fn seeded_weights_are_reproducible() {
        let a = FeatureNet::new(FeatureNetSpec::default()).unwrap();
        let b = FeatureNet::new(FeatureNetSpec::default()).unwrap();
        let x = image(3, 12);
        assert_eq!(a.infer(&x).unwrap(), b.infer(&x).unwrap());
        let mut c = a.clone();
        assert_eq!(c.forward(&x).unwrap(), a.infer(&x).unwrap());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut net = FeatureNet::new(FeatureNetSpec::default()).unwrap();
        let x = image(5, 8);
        let taps = net.forward(&x).unwrap();
        let weights: Vec<Tensor> = taps
            .iter()
            .enumerate()
            .map(|(k, t)| Tensor::from_fn(t.shape(), |i| (((i + 3 * k) * 31) % 13) as f64 / 13.0 - 0.5))
            .collect();
        let grad = net.backward_input(&weights).unwrap();
        let f = |p: &Tensor| -> Result<f64> {
            Ok(net
                .infer(p)?
                .iter()
                .zip(&weights)
                .map(|(t, w)| t.data().iter().zip(w.data()).map(|(a, b)| a * b).sum::<f64>())
                .sum())
        };
        let err = gradient_check(f, &grad, &x, 1e-5).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn layer_list_validation() {
        let mut s = FeatureNetSpec::default();
        s.taps.clear();
        assert!(FeatureNet::new(s).is_err());
        let mut s = FeatureNetSpec::default();
        s.taps = vec![5];
        assert!(FeatureNet::new(s).is_err());
    }
}
