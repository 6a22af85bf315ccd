//! Residual video super-resolution generator.
//!
//! Each of the F pre-upsampled input frames goes through one shared
//! convolution; the per-frame feature maps are concatenated along the channel
//! axis and fused, then refined by a stack of residual blocks and projected
//! back to a single luminance channel:
//!
//! ```text
//! frame conv (1->C) + ReLU, shared across frames
//! concat (F*C) -> fusion conv (F*C->C) + ReLU -> conv (C->C) + ReLU
//! residual blocks: x + conv(ReLU(conv(x)))
//! output conv (C->1)
//! ```
//!
//! With the default config that is 1 + 2 + 2*15 + 1 = 34 convolutions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::layers::{Activation, Conv2d};
use crate::models::{Network, NetworkKind};
use crate::tensor::{Parameter, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub input_frames: usize,
    pub base_channels: usize,
    pub num_res_blocks: usize,
    pub kernel: usize,
    pub patch_size: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            input_frames: 5,
            base_channels: 64,
            num_res_blocks: 15,
            kernel: 3,
            patch_size: 36,
        }
    }
}

impl GeneratorConfig {
    /// `num_res_blocks == 0` is accepted so block-count arithmetic can be
    /// checked; training configs should keep at least one block.
    pub fn validate(&self) -> Result<()> {
        if self.input_frames == 0 || self.input_frames % 2 == 0 {
            return Err(Error::config(format!(
                "input_frames must be odd and >= 1, got {}",
                self.input_frames
            )));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::config(format!("kernel must be odd, got {}", self.kernel)));
        }
        if self.base_channels == 0 {
            return Err(Error::config("base_channels must be >= 1"));
        }
        if self.patch_size < self.kernel {
            return Err(Error::config("patch_size must be at least the kernel size"));
        }
        Ok(())
    }

    /// Whether two configs describe the same parameter tensors.
    pub fn same_architecture(&self, other: &GeneratorConfig) -> bool {
        (self.input_frames, self.base_channels, self.num_res_blocks, self.kernel)
            == (other.input_frames, other.base_channels, other.num_res_blocks, other.kernel)
    }
}

#[derive(Clone, Debug)]
struct ResBlock {
    conv1: Conv2d,
    act: Activation,
    conv2: Conv2d,
}

impl ResBlock {
    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.act.infer(&self.conv1.infer(x)?);
        let mut y = self.conv2.infer(&h)?;
        y.add_assign(x)?;
        Ok(y)
    }

    fn forward(&mut self, x: Tensor) -> Result<Tensor> {
        let h = self.conv1.forward(x.clone())?;
        let h = self.act.forward(h);
        let mut y = self.conv2.forward(h)?;
        y.add_assign(&x)?;
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let g = self.conv2.backward(grad_out, true)?;
        let g = self.act.backward(&g)?;
        let mut g = self.conv1.backward(&g, true)?;
        g.add_assign(grad_out)?;
        Ok(g)
    }
}

/// Init multiplier for the last convolution of every residual branch.
pub const RESIDUAL_INIT_SCALE: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct Generator {
    config: GeneratorConfig,
    frame_conv: Conv2d,
    frame_act: Activation,
    fusion: Conv2d,
    fusion_act: Activation,
    post_fusion: Conv2d,
    post_act: Activation,
    blocks: Vec<ResBlock>,
    output: Conv2d,
    input_shape: Option<Vec<usize>>,
}

impl Generator {
    /// He-initialized weights and zero biases drawn from `seed`. The second
    /// convolution of each residual block is further scaled by
    /// [`RESIDUAL_INIT_SCALE`] so the residual stream keeps its magnitude
    /// through deep stacks.
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, k) = (config.base_channels, config.kernel);
        let frame_conv = Conv2d::new("frame_conv", 1, c, k, 1, true, &mut rng);
        let fusion = Conv2d::new("fusion", config.input_frames * c, c, k, 1, true, &mut rng);
        let post_fusion = Conv2d::new("post_fusion", c, c, k, 1, true, &mut rng);
        let blocks = (0..config.num_res_blocks)
            .map(|i| ResBlock {
                conv1: Conv2d::new(&format!("res{i}.conv1"), c, c, k, 1, true, &mut rng),
                act: Activation::relu(),
                conv2: {
                    let mut conv = Conv2d::new(&format!("res{i}.conv2"), c, c, k, 1, true, &mut rng);
                    conv.weight.value = conv.weight.value.scale(RESIDUAL_INIT_SCALE);
                    conv
                },
            })
            .collect();
        let output = Conv2d::new("output", c, 1, k, 1, true, &mut rng);
        Ok(Generator {
            config,
            frame_conv,
            frame_act: Activation::relu(),
            fusion,
            fusion_act: Activation::relu(),
            post_fusion,
            post_act: Activation::relu(),
            blocks,
            output,
            input_shape: None,
        })
    }

    /// A generator that reproduces the center input frame exactly for
    /// non-negative inputs: identity taps route the center frame through the
    /// first channel and every residual branch is zero. Evaluating it gives the
    /// bicubic baseline.
    pub fn passthrough(config: GeneratorConfig) -> Result<Self> {
        let mut g = Generator::new(config, 0)?;
        for p in g.params_mut() {
            p.value.fill(0.0);
        }
        let (c, k) = (g.config.base_channels, g.config.kernel);
        let center_tap = (k / 2) * k + k / 2;
        let center_frame = g.config.input_frames / 2;
        let set = |conv: &mut Conv2d, out: usize, inp: usize| {
            let cin = conv.in_channels();
            conv.weight.value.data_mut()[(out * cin + inp) * k * k + center_tap] = 1.0;
        };
        set(&mut g.frame_conv, 0, 0);
        set(&mut g.fusion, 0, center_frame * c);
        set(&mut g.post_fusion, 0, 0);
        set(&mut g.output, 0, 0);
        Ok(g)
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn num_res_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of convolution operations in the forward pass; the shared
    /// per-frame convolution counts once.
    pub fn conv_count(&self) -> usize {
        3 + 2 * self.blocks.len() + 1
    }

    fn check_input(&self, y: &Tensor) -> Result<(usize, usize, usize)> {
        let f = self.config.input_frames;
        match *y.shape() {
            [b, frames, 1, h, w] if frames == f => {
                if h < self.config.kernel || w < self.config.kernel {
                    return Err(Error::shape(format!(
                        "frames of {h}x{w} are smaller than the {0}x{0} kernel",
                        self.config.kernel
                    )));
                }
                Ok((b, h, w))
            }
            _ => Err(Error::shape(format!(
                "generator expects (batch, {f}, 1, height, width), got {:?}",
                y.shape()
            ))),
        }
    }

    /// Per-frame features stacked along channels: `(B, F*C, H, W)`. The
    /// `(B*F, C, H, W)` layout of the shared convolution's output is already the
    /// channel concatenation of the frames, so this is a reshape.
    fn frames_to_channels(&self, per_frame: Tensor, b: usize, h: usize, w: usize) -> Result<Tensor> {
        per_frame.reshape(&[b, self.config.input_frames * self.config.base_channels, h, w])
    }

    /// Forward pass without caching; safe to share across threads.
    pub fn infer(&self, y: &Tensor) -> Result<Tensor> {
        let (b, h, w) = self.check_input(y)?;
        let frames = y.clone().reshape(&[b * self.config.input_frames, 1, h, w])?;
        let x = self.frame_act.infer(&self.frame_conv.infer(&frames)?);
        let x = self.frames_to_channels(x, b, h, w)?;
        let x = self.fusion_act.infer(&self.fusion.infer(&x)?);
        let mut x = self.post_act.infer(&self.post_fusion.infer(&x)?);
        for block in &self.blocks {
            x = block.infer(&x)?;
        }
        let out = self.output.infer(&x)?;
        out.debug_check_finite("generator");
        Ok(out)
    }

    /// Training forward pass; caches activations for [`Generator::backward`].
    pub fn forward(&mut self, y: &Tensor) -> Result<Tensor> {
        let (b, h, w) = self.check_input(y)?;
        self.input_shape = Some(y.shape().to_vec());
        let frames = y.clone().reshape(&[b * self.config.input_frames, 1, h, w])?;
        let x = self.frame_conv.forward(frames)?;
        let x = self.frame_act.forward(x);
        let x = self.frames_to_channels(x, b, h, w)?;
        let x = self.fusion.forward(x)?;
        let x = self.fusion_act.forward(x);
        let x = self.post_fusion.forward(x)?;
        let mut x = self.post_act.forward(x);
        for block in &mut self.blocks {
            x = block.forward(x)?;
        }
        self.output.forward(x)
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the
    /// input frames.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let input_shape = self
            .input_shape
            .clone()
            .ok_or_else(|| Error::Numeric("generator backward without forward".into()))?;
        let mut g = self.output.backward(grad_out, true)?;
        for block in self.blocks.iter_mut().rev() {
            g = block.backward(&g)?;
        }
        let g = self.post_act.backward(&g)?;
        let g = self.post_fusion.backward(&g, true)?;
        let g = self.fusion_act.backward(&g)?;
        let g = self.fusion.backward(&g, true)?;
        let (b, h, w) = (input_shape[0], input_shape[3], input_shape[4]);
        let g = g.reshape(&[b * self.config.input_frames, self.config.base_channels, h, w])?;
        let g = self.frame_act.backward(&g)?;
        let g = self.frame_conv.backward(&g, true)?;
        g.reshape(&input_shape)
    }

    fn convs(&self) -> Vec<&Conv2d> {
        let mut v = vec![&self.frame_conv, &self.fusion, &self.post_fusion];
        for b in &self.blocks {
            v.push(&b.conv1);
            v.push(&b.conv2);
        }
        v.push(&self.output);
        v
    }

    /// Drops cached activations to release memory.
    pub fn clear_cache(&mut self) {
        self.frame_conv.clear_cache();
        self.fusion.clear_cache();
        self.post_fusion.clear_cache();
        self.output.clear_cache();
        for a in [&mut self.frame_act, &mut self.fusion_act, &mut self.post_act] {
            a.clear_cache();
        }
        for b in &mut self.blocks {
            b.conv1.clear_cache();
            b.conv2.clear_cache();
            b.act.clear_cache();
        }
    }
}

impl Network for Generator {
    fn kind(&self) -> NetworkKind {
        NetworkKind::Generator
    }

    fn config_text(&self) -> String {
        toml::to_string(&self.config).expect("generator config serializes")
    }

    fn params(&self) -> Vec<&Parameter> {
        self.convs().into_iter().flat_map(|c| c.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = Vec::new();
        v.extend(self.frame_conv.params_mut());
        v.extend(self.fusion.params_mut());
        v.extend(self.post_fusion.params_mut());
        for b in &mut self.blocks {
            v.extend(b.conv1.params_mut());
            v.extend(b.conv2.params_mut());
        }
        v.extend(self.output.params_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{gradient_check_at, sample_coords};
    use crate::losses::{mse_loss, Reduction};

    fn small() -> GeneratorConfig {
        GeneratorConfig {
            base_channels: 4,
            num_res_blocks: 2,
            patch_size: 8,
            ..Default::default()
        }
    }

    #[test]
    fn default_architecture_counts() {
        let g = Generator::new(GeneratorConfig::default(), 1).unwrap();
        assert_eq!(g.conv_count(), 34);
        assert_eq!(g.num_res_blocks(), 15);
        assert_eq!(g.param_count(), 640 + 184_384 + 36_928 + 30 * 36_928 + 577);
        let g0 = Generator::new(
            GeneratorConfig { num_res_blocks: 0, ..Default::default() },
            1,
        )
        .unwrap();
        assert_eq!(g.param_count() - g0.param_count(), 30 * 36_928);
    }

    #[test]
    fn output_shape_matches_input_patch() {
        let g = Generator::new(small(), 2).unwrap();
        let y = Tensor::full(&[2, 5, 1, 9, 7], 0.5);
        assert_eq!(g.infer(&y).unwrap().shape(), &[2, 1, 9, 7]);
        assert!(g.infer(&Tensor::zeros(&[1, 3, 1, 8, 8])).is_err());
        assert!(g.infer(&Tensor::zeros(&[1, 5, 2, 8, 8])).is_err());
    }

    #[test]
    fn zero_network_maps_zero_to_zero() {
        let mut g = Generator::new(small(), 3).unwrap();
        for p in g.params_mut() {
            p.value.fill(0.0);
        }
        let out = g.infer(&Tensor::zeros(&[1, 5, 1, 8, 8])).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn passthrough_copies_center_frame() {
        let g = Generator::passthrough(small()).unwrap();
        let y = Tensor::from_fn(&[2, 5, 1, 6, 6], |i| ((i * 37) % 101) as f64 / 100.0);
        let out = g.infer(&y).unwrap();
        for b in 0..2 {
            let center = &y.data()[(b * 5 + 2) * 36..(b * 5 + 3) * 36];
            assert_eq!(&out.data()[b * 36..(b + 1) * 36], center);
        }
    }

    #[test]
    fn forward_and_infer_agree() {
        let mut g = Generator::new(small(), 4).unwrap();
        let y = Tensor::from_fn(&[1, 5, 1, 8, 8], |i| (i as f64 * 0.37).sin().abs());
        assert_eq!(g.forward(&y).unwrap(), g.infer(&y).unwrap());
    }

    #[test]
    fn constant_input_gives_constant_interior() {
        let g = Generator::new(small(), 5).unwrap();
        let n = 24;
        let out = g.infer(&Tensor::full(&[1, 5, 1, n, n], 0.4)).unwrap();
        // each 3x3 convolution widens the zero-padding influence by one pixel
        let margin = g.conv_count();
        let inner: Vec<f64> = (margin..n - margin)
            .flat_map(|i| (margin..n - margin).map(move |j| (i, j)))
            .map(|(i, j)| out.data()[i * n + j])
            .collect();
        assert!(!inner.is_empty());
        assert!(inner.iter().all(|v| (v - inner[0]).abs() < 1e-12));
    }

    #[test]
    fn composite_gradient_matches_finite_differences() {
        let mut g = Generator::new(small(), 6).unwrap();
        let y = Tensor::from_fn(&[1, 5, 1, 8, 8], |i| ((i * 13) % 17) as f64 / 17.0);
        let x = Tensor::from_fn(&[1, 1, 8, 8], |i| ((i * 7) % 11) as f64 / 11.0);
        g.zero_grads();
        let out = g.forward(&y).unwrap();
        let (_, grad) = mse_loss(&x, &out, Reduction::Mean).unwrap();
        let gy = g.backward(&grad).unwrap();
        let coords = sample_coords(y.numel(), 20, 1);
        let err = gradient_check_at(
            |p| Ok(mse_loss(&x, &g.infer(p)?, Reduction::Mean)?.0),
            &gy,
            &y,
            1e-5,
            &coords,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
