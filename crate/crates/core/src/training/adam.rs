//! ADAM with classic L2 weight decay.

use crate::error::{Error, Result};
use crate::tensor::Parameter;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamSettings {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        AdamSettings {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// One bias-corrected ADAM update at step `t >= 1`. The decay term
/// `weight_decay * value` is added to the gradient before the moments.
pub fn adam_step(param: &mut Parameter, s: &AdamSettings, t: u64) -> Result<()> {
    if t == 0 {
        return Err(Error::config("adam step index starts at 1"));
    }
    if !param.grad.is_finite() {
        return Err(Error::Numeric(format!("non-finite gradient in {}", param.name)));
    }
    let bc1 = 1.0 - s.beta1.powf(t as f64);
    let bc2 = 1.0 - s.beta2.powf(t as f64);
    let value = param.value.data_mut();
    let grad = param.grad.data();
    let m = param.adam_m.data_mut();
    let v = param.adam_v.data_mut();
    for i in 0..value.len() {
        let g = grad[i] + s.weight_decay * value[i];
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        value[i] -= s.lr * m_hat / (v_hat.sqrt() + s.eps);
    }
    Ok(())
}
