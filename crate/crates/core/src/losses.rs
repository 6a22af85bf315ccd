//! Training objectives and their gradients w.r.t. the generator output.
//!
//! Pixel and feature distances are sums over all elements; expectations in the
//! adversarial terms are minibatch means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::BnMode;
use crate::models::{Discriminator, FeatureNet, Generator};
use crate::tensor::Tensor;

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Default Charbonnier epsilon.
pub const CHARBONNIER_EPS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

/// Distance used for the pixel and feature regularizers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    #[default]
    Charbonnier,
    /// Squared l2 distance, summed.
    L2,
}

/// Generator-side adversarial objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GanMode {
    /// `mean(log(1 - D(G(Y))))`, minimized by the generator.
    #[default]
    Minimax,
    /// `-mean(log D(G(Y)))`.
    Nonsaturating,
}

/// Weights of the feature (`alpha`) and adversarial (`beta`) terms; the pixel
/// term gets `1 - alpha - beta`. Shipped defaults are desk-scale choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 0.3,
            beta: 0.01,
            epsilon: CHARBONNIER_EPS,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha + self.beta < 1.0) {
            return Err(Error::config(format!(
                "loss weights need alpha >= 0, beta >= 0 and alpha + beta < 1 (alpha {}, beta {})",
                self.alpha, self.beta
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Full adversarial runs need both weights strictly positive.
    pub fn validate_strict(&self) -> Result<()> {
        self.validate()?;
        if self.alpha <= 0.0 || self.beta <= 0.0 {
            return Err(Error::config("adversarial training needs alpha > 0 and beta > 0"));
        }
        Ok(())
    }

    pub fn pixel_weight(&self) -> f64 {
        1.0 - self.alpha - self.beta
    }
}

/// `sum (x - xhat)^2` (or its mean) and the gradient w.r.t. `xhat`.
pub fn mse_loss(x: &Tensor, xhat: &Tensor, reduction: Reduction) -> Result<(f64, Tensor)> {
    xhat.same_shape(x, "mse_loss")?;
    let scale = match reduction {
        Reduction::Mean => 1.0 / x.numel() as f64,
        Reduction::Sum => 1.0,
    };
    let loss = x.data().iter().zip(xhat.data()).map(|(a, b)| (b - a) * (b - a)).sum::<f64>() * scale;
    let grad = xhat.zip_map(x, |b, a| 2.0 * (b - a) * scale)?;
    Ok((loss, grad))
}

/// `sum sqrt((xhat - x)^2 + eps^2)` and its gradient w.r.t. `xhat`.
pub fn charbonnier(xhat: &Tensor, x: &Tensor, epsilon: f64) -> Result<(f64, Tensor)> {
    xhat.same_shape(x, "charbonnier")?;
    let eps2 = epsilon * epsilon;
    let grad = xhat.zip_map(x, |a, b| {
        let d = a - b;
        d / (d * d + eps2).sqrt()
    })?;
    let loss = xhat
        .data()
        .iter()
        .zip(x.data())
        .map(|(a, b)| ((a - b) * (a - b) + eps2).sqrt())
        .sum();
    Ok((loss, grad))
}

/// Pixel distance of the chosen kind.
pub fn distance(kind: DistanceKind, xhat: &Tensor, x: &Tensor, epsilon: f64) -> Result<(f64, Tensor)> {
    match kind {
        DistanceKind::Charbonnier => charbonnier(xhat, x, epsilon),
        DistanceKind::L2 => mse_loss(x, xhat, Reduction::Sum),
    }
}

/// Distance between tapped feature maps of `xhat` and `x`, summed over taps
/// and backpropagated through the frozen feature network.
pub fn feature_distance_loss(
    kind: DistanceKind,
    xhat: &Tensor,
    x: &Tensor,
    feature_net: &mut FeatureNet,
    epsilon: f64,
) -> Result<(f64, Tensor)> {
    xhat.same_shape(x, "feature loss")?;
    let target = feature_net.infer(x)?;
    let taps = feature_net.forward(xhat)?;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(taps.len());
    for (t, r) in taps.iter().zip(&target) {
        let (l, g) = distance(kind, t, r, epsilon)?;
        loss += l;
        grads.push(g);
    }
    Ok((loss, feature_net.backward_input(&grads)?))
}

/// Charbonnier distance in feature space.
pub fn feature_charbonnier(
    xhat: &Tensor,
    x: &Tensor,
    feature_net: &mut FeatureNet,
    epsilon: f64,
) -> Result<(f64, Tensor)> {
    feature_distance_loss(DistanceKind::Charbonnier, xhat, x, feature_net, epsilon)
}

/// Discriminator and generator adversarial losses with their gradients.
#[derive(Clone, Debug)]
pub struct GanLosses {
    /// `-mean(log d_real) - mean(log(1 - d_fake))`.
    pub loss_d: f64,
    pub loss_g: f64,
    /// d loss_d / d d_real.
    pub grad_d_real: Tensor,
    /// d loss_d / d d_fake.
    pub grad_d_fake: Tensor,
    /// d loss_g / d d_fake.
    pub grad_g_fake: Tensor,
}

fn check_probs(p: &Tensor, what: &str) -> Result<()> {
    if p.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Numeric(format!("{what} contains values outside [0, 1]")));
    }
    Ok(())
}

pub fn gan_losses(d_real: &Tensor, d_fake: &Tensor, mode: GanMode) -> Result<GanLosses> {
    check_probs(d_real, "d_real")?;
    check_probs(d_fake, "d_fake")?;
    let clamp = |p: f64| p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let nr = d_real.numel() as f64;
    let nf = d_fake.numel() as f64;
    let real_term = -d_real.data().iter().map(|&p| clamp(p).ln()).sum::<f64>() / nr;
    let fake_term = -d_fake.data().iter().map(|&p| (1.0 - clamp(p)).ln()).sum::<f64>() / nf;
    let (loss_g, grad_g_fake) = match mode {
        GanMode::Minimax => (-fake_term, d_fake.map(|p| -1.0 / (nf * (1.0 - clamp(p))))),
        GanMode::Nonsaturating => (
            -d_fake.data().iter().map(|&p| clamp(p).ln()).sum::<f64>() / nf,
            d_fake.map(|p| -1.0 / (nf * clamp(p))),
        ),
    };
    Ok(GanLosses {
        loss_d: real_term + fake_term,
        loss_g,
        grad_d_real: d_real.map(|p| -1.0 / (nr * clamp(p))),
        grad_d_fake: d_fake.map(|p| 1.0 / (nf * (1.0 - clamp(p)))),
        grad_g_fake,
    })
}

/// Switches of the combined objective that are not loss weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ObjectiveOptions {
    pub distance: DistanceKind,
    pub gan_mode: GanMode,
}

/// Components of the combined objective.
#[derive(Clone, Debug)]
pub struct TotalLoss {
    pub total: f64,
    pub pixel: f64,
    pub feature: f64,
    pub adversarial: f64,
    /// Gradient of `total` w.r.t. the generator output.
    pub grad: Tensor,
}

/// `alpha * feature + beta * adversarial + (1 - alpha - beta) * pixel` for a
/// given generator output. Terms with zero weight are not evaluated.
///
/// The discriminator runs in train mode and accumulates parameter gradients
/// as a side effect; callers zero them before a discriminator update.
pub fn total_loss(
    x: &Tensor,
    xhat: &Tensor,
    discriminator: &mut Discriminator,
    feature_net: &mut FeatureNet,
    weights: &LossWeights,
    options: ObjectiveOptions,
) -> Result<TotalLoss> {
    weights.validate()?;
    let (pixel, pixel_grad) = distance(options.distance, xhat, x, weights.epsilon)?;
    let mut grad = Tensor::zeros(xhat.shape());
    let mut total = 0.0;
    let mut feature = 0.0;
    let mut adversarial = 0.0;
    if weights.alpha != 0.0 {
        let (f, g) = feature_distance_loss(options.distance, xhat, x, feature_net, weights.epsilon)?;
        feature = f;
        total += weights.alpha * f;
        grad.axpy(weights.alpha, &g)?;
    }
    if weights.beta != 0.0 {
        let d_fake = discriminator.forward(xhat, BnMode::Train)?;
        let gl = gan_losses(&d_fake, &d_fake, options.gan_mode)?;
        adversarial = gl.loss_g;
        total += weights.beta * adversarial;
        let g = discriminator.backward(&gl.grad_g_fake)?;
        grad.axpy(weights.beta, &g)?;
    }
    total += weights.pixel_weight() * pixel;
    grad.axpy(weights.pixel_weight(), &pixel_grad)?;
    Ok(TotalLoss {
        total,
        pixel,
        feature,
        adversarial,
        grad,
    })
}

/// Runs the generator on `frames` and evaluates [`total_loss`] on its output.
/// The generator keeps its activation cache, so `generator.backward(&loss.grad)`
/// completes the update.
pub fn total_loss_for(
    x: &Tensor,
    frames: &Tensor,
    generator: &mut Generator,
    discriminator: &mut Discriminator,
    feature_net: &mut FeatureNet,
    weights: &LossWeights,
    options: ObjectiveOptions,
) -> Result<TotalLoss> {
    let xhat = generator.forward(frames)?;
    total_loss(x, &xhat, discriminator, feature_net, weights, options)
}
