//! Stateful layer wrappers: parameters plus the activations cached by the
//! last training forward pass.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::{self, BatchNormCache, BnMode, RunningStats};
use crate::tensor::{Parameter, Tensor};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

fn missing_cache(layer: &str) -> Error {
    Error::Numeric(format!("{layer}: backward called without a cached forward pass"))
}

/// He (fan-in) Gaussian initialization.
pub fn he_normal<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    Tensor::randn(shape, (2.0 / fan_in as f64).sqrt(), rng)
}

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: Parameter,
    pub bias: Option<Parameter>,
    pub stride: usize,
    pub pad: usize,
    input: Option<Tensor>,
}

impl Conv2d {
    /// Square `kernel`, padding `kernel / 2`.
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        with_bias: bool,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let weight = he_normal(&[out_channels, in_channels, kernel, kernel], fan_in, rng);
        Conv2d {
            weight: Parameter::new(format!("{name}.weight"), weight),
            bias: with_bias
                .then(|| Parameter::new(format!("{name}.bias"), Tensor::zeros(&[out_channels]))),
            stride,
            pad: kernel / 2,
            input: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        kernels::conv2d_forward(
            x,
            &self.weight.value,
            self.bias.as_ref().map(|b| &b.value),
            self.stride,
            self.pad,
        )
    }

    pub fn forward(&mut self, x: Tensor) -> Result<Tensor> {
        let y = self.infer(&x)?;
        self.input = Some(x);
        Ok(y)
    }

    /// Returns the input gradient; accumulates parameter gradients when
    /// `param_grads` is set.
    pub fn backward(&mut self, grad_out: &Tensor, param_grads: bool) -> Result<Tensor> {
        let input = self.input.as_ref().ok_or_else(|| missing_cache(&self.weight.name))?;
        if param_grads {
            let (gw, gb) = kernels::conv2d_backward_params(
                grad_out,
                input,
                self.weight.value.shape(),
                self.stride,
                self.pad,
            )?;
            self.weight.grad.add_assign(&gw)?;
            if let Some(b) = self.bias.as_mut() {
                b.grad.add_assign(&gb)?;
            }
        }
        kernels::conv2d_backward_input(grad_out, input.shape(), &self.weight.value, self.stride, self.pad)
    }

    pub fn params(&self) -> Vec<&Parameter> {
        std::iter::once(&self.weight).chain(self.bias.as_ref()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        std::iter::once(&mut self.weight).chain(self.bias.as_mut()).collect()
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }
}

/// Leaky ReLU; slope 0 is the plain ReLU.
#[derive(Clone, Debug, Default)]
pub struct Activation {
    pub slope: f64,
    input: Option<Tensor>,
}

impl Activation {
    pub fn relu() -> Self {
        Self::leaky(0.0)
    }

    pub fn leaky(slope: f64) -> Self {
        Activation { slope, input: None }
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        kernels::leaky_relu_forward(x, self.slope)
    }

    pub fn forward(&mut self, x: Tensor) -> Tensor {
        let y = self.infer(&x);
        self.input = Some(x);
        y
    }

    pub fn backward(&self, grad_out: &Tensor) -> Result<Tensor> {
        let input = self.input.as_ref().ok_or_else(|| missing_cache("activation"))?;
        kernels::leaky_relu_backward(grad_out, input, self.slope)
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm2d {
    pub gamma: Parameter,
    pub beta: Parameter,
    pub running: RunningStats,
    name: String,
    cache: Option<BatchNormCache>,
}

impl BatchNorm2d {
    pub fn new(name: &str, channels: usize) -> Self {
        BatchNorm2d {
            gamma: Parameter::new(format!("{name}.gamma"), Tensor::full(&[channels], 1.0)),
            beta: Parameter::new(format!("{name}.beta"), Tensor::zeros(&[channels])),
            running: RunningStats::new(channels),
            name: name.to_string(),
            cache: None,
        }
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let (y, _, _) = kernels::batchnorm_forward(
            x,
            &self.gamma.value,
            &self.beta.value,
            &self.running,
            BnMode::Eval,
            BN_MOMENTUM,
            BN_EPS,
        )?;
        Ok(y)
    }

    /// Train mode refreshes the running statistics.
    pub fn forward(&mut self, x: &Tensor, mode: BnMode) -> Result<Tensor> {
        let (y, stats, cache) = kernels::batchnorm_forward(
            x,
            &self.gamma.value,
            &self.beta.value,
            &self.running,
            mode,
            BN_MOMENTUM,
            BN_EPS,
        )?;
        self.running = stats;
        self.cache = Some(cache);
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor, param_grads: bool) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_cache(&self.name))?;
        let (gi, gg, gb) = kernels::batchnorm_backward(grad_out, cache, &self.gamma.value)?;
        if param_grads {
            self.gamma.grad.add_assign(&gg)?;
            self.beta.grad.add_assign(&gb)?;
        }
        Ok(gi)
    }

    pub fn buffer_names(&self) -> [String; 2] {
        [
            format!("{}.running_mean", self.name),
            format!("{}.running_var", self.name),
        ]
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Dense {
            weight: Parameter::new(format!("{name}.weight"), he_normal(&[outputs, inputs], inputs, rng)),
            bias: Parameter::new(format!("{name}.bias"), Tensor::zeros(&[outputs])),
            input: None,
        }
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        kernels::dense_forward(x, &self.weight.value, &self.bias.value)
    }

    pub fn forward(&mut self, x: Tensor) -> Result<Tensor> {
        let y = self.infer(&x)?;
        self.input = Some(x);
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor, param_grads: bool) -> Result<Tensor> {
        let input = self.input.as_ref().ok_or_else(|| missing_cache(&self.weight.name))?;
        let (gi, gw, gb) = kernels::dense_backward(grad_out, input, &self.weight.value)?;
        if param_grads {
            self.weight.grad.add_assign(&gw)?;
            self.bias.grad.add_assign(&gb)?;
        }
        Ok(gi)
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }
}
