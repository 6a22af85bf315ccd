//! Per-channel batch normalization over `(B, C, H, W)` inputs.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Eval,
}

/// Exponential moving averages of per-channel mean and (biased) variance.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub mean: Tensor,
    pub var: Tensor,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: Tensor::zeros(&[channels]),
            var: Tensor::full(&[channels], 1.0),
        }
    }
}

/// What the backward pass needs from a forward call.
#[derive(Clone, Debug)]
pub struct BatchNormCache {
    mode: BnMode,
    xhat: Tensor,
    inv_std: Vec<f64>,
}

/// Normalizes, scales by `gamma` and shifts by `beta`.
///
/// Train mode uses the batch statistics and returns running stats updated as
/// `(1 - momentum) * old + momentum * batch`; eval mode uses the running stats
/// and returns them unchanged.
pub fn batchnorm_forward(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    stats: &RunningStats,
    mode: BnMode,
    momentum: f64,
    eps: f64,
) -> Result<(Tensor, RunningStats, BatchNormCache)> {
    let (b, c, h, w) = input.dims4()?;
    gamma.expect_shape(&[c], "batchnorm gamma")?;
    beta.expect_shape(&[c], "batchnorm beta")?;
    stats.mean.expect_shape(&[c], "batchnorm running mean")?;
    stats.var.expect_shape(&[c], "batchnorm running var")?;
    let plane = h * w;
    let count = b * plane;
    let x = input.data();
    let channel_values = |ch: usize| {
        (0..b).flat_map(move |n| {
            let start = (n * c + ch) * plane;
            x[start..start + plane].iter().copied()
        })
    };

    let (mean, var): (Vec<f64>, Vec<f64>) = match mode {
        BnMode::Train => {
            if count < 2 {
                return Err(Error::DegenerateBatch(format!(
                    "batchnorm needs at least 2 values per channel in train mode, got {count}"
                )));
            }
            (0..c)
                .map(|ch| {
                    let m = channel_values(ch).sum::<f64>() / count as f64;
                    let v = channel_values(ch).map(|x| (x - m) * (x - m)).sum::<f64>() / count as f64;
                    (m, v)
                })
                .unzip()
        }
        BnMode::Eval => (stats.mean.data().to_vec(), stats.var.data().to_vec()),
    };

    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut xhat = Tensor::zeros(input.shape());
    let mut out = Tensor::zeros(input.shape());
    for n in 0..b {
        for ch in 0..c {
            let start = (n * c + ch) * plane;
            let (g, bt) = (gamma.data()[ch], beta.data()[ch]);
            for i in start..start + plane {
                let xh = (x[i] - mean[ch]) * inv_std[ch];
                xhat.data_mut()[i] = xh;
                out.data_mut()[i] = g * xh + bt;
            }
        }
    }

    let new_stats = match mode {
        BnMode::Train => RunningStats {
            mean: Tensor::from_fn(&[c], |ch| {
                (1.0 - momentum) * stats.mean.data()[ch] + momentum * mean[ch]
            }),
            var: Tensor::from_fn(&[c], |ch| {
                (1.0 - momentum) * stats.var.data()[ch] + momentum * var[ch]
            }),
        },
        BnMode::Eval => stats.clone(),
    };
    out.debug_check_finite("batchnorm_forward");
    Ok((out, new_stats, BatchNormCache { mode, xhat, inv_std }))
}

/// Returns `(grad_input, grad_gamma, grad_beta)`.
pub fn batchnorm_backward(
    grad_out: &Tensor,
    cache: &BatchNormCache,
    gamma: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    grad_out.same_shape(&cache.xhat, "batchnorm grad_out")?;
    let (b, c, h, w) = grad_out.dims4()?;
    let plane = h * w;
    let count = (b * plane) as f64;
    let go = grad_out.data();
    let xh = cache.xhat.data();
    let mut grad_gamma = Tensor::zeros(&[c]);
    let mut grad_beta = Tensor::zeros(&[c]);
    for n in 0..b {
        for ch in 0..c {
            let start = (n * c + ch) * plane;
            for i in start..start + plane {
                grad_beta.data_mut()[ch] += go[i];
                grad_gamma.data_mut()[ch] += go[i] * xh[i];
            }
        }
    }
    let mut grad_in = Tensor::zeros(grad_out.shape());
    for n in 0..b {
        for ch in 0..c {
            let start = (n * c + ch) * plane;
            let scale = gamma.data()[ch] * cache.inv_std[ch];
            let (sum_g, sum_gx) = (grad_beta.data()[ch], grad_gamma.data()[ch]);
            for i in start..start + plane {
                grad_in.data_mut()[i] = match cache.mode {
                    BnMode::Train => scale * (go[i] - sum_g / count - xh[i] * sum_gx / count),
                    BnMode::Eval => scale * go[i],
                };
            }
        }
    }
    Ok((grad_in, grad_gamma, grad_beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::gradient_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn channel_moments(t: &Tensor, ch: usize) -> (f64, f64) {
        let (b, c, h, w) = t.dims4().unwrap();
        let vals: Vec<f64> = (0..b)
            .flat_map(|n| {
                let s = (n * c + ch) * h * w;
                t.data()[s..s + h * w].to_vec()
            })
            .collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
        (m, v)
    }

    #[test]
    fn train_mode_normalizes_each_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::randn(&[4, 3, 5, 5], 2.0, &mut rng).map(|v| v + 3.0);
        let (y, stats, _) = batchnorm_forward(
            &x,
            &Tensor::full(&[3], 1.0),
            &Tensor::zeros(&[3]),
            &RunningStats::new(3),
            BnMode::Train,
            0.1,
            0.0,
        )
        .unwrap();
        for ch in 0..3 {
            let (m, v) = channel_moments(&y, ch);
            assert!(m.abs() < 1e-10 && (v - 1.0).abs() < 1e-10, "{m} {v}");
            let (xm, xv) = channel_moments(&x, ch);
            assert!((stats.mean.data()[ch] - 0.1 * xm).abs() < 1e-12);
            assert!((stats.var.data()[ch] - (0.9 + 0.1 * xv)).abs() < 1e-12);
        }
        let (y, _, _) = batchnorm_forward(
            &x,
            &Tensor::full(&[3], 1.0),
            &Tensor::full(&[3], 5.0),
            &RunningStats::new(3),
            BnMode::Train,
            0.1,
            1e-5,
        )
        .unwrap();
        for ch in 0..3 {
            assert!((channel_moments(&y, ch).0 - 5.0).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_batch_rejected_in_train_mode_only() {
        let x = Tensor::full(&[1, 2, 1, 1], 1.0);
        let g = Tensor::full(&[2], 1.0);
        let b = Tensor::zeros(&[2]);
        let st = RunningStats::new(2);
        assert!(matches!(
            batchnorm_forward(&x, &g, &b, &st, BnMode::Train, 0.1, 1e-5),
            Err(Error::DegenerateBatch(_))
        ));
        let (y, st2, _) = batchnorm_forward(&x, &g, &b, &st, BnMode::Eval, 0.1, 1e-5).unwrap();
        assert_eq!(st2, st);
        assert!((y.data()[0] - 1.0 / (1.0f64 + 1e-5).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Tensor::randn(&[4, 2, 3, 3], 1.0, &mut rng);
        let gamma = Tensor::randn(&[2], 1.0, &mut rng);
        let beta = Tensor::randn(&[2], 1.0, &mut rng);
        let r = Tensor::randn(&[4, 2, 3, 3], 1.0, &mut rng);
        let st = RunningStats {
            mean: Tensor::randn(&[2], 0.3, &mut rng),
            var: Tensor::full(&[2], 1.7),
        };
        for mode in [BnMode::Train, BnMode::Eval] {
            let f = |x: &Tensor, g: &Tensor, b: &Tensor| -> Result<f64> {
                let (y, _, _) = batchnorm_forward(x, g, b, &st, mode, 0.1, 1e-5)?;
                Ok(y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum())
            };
            let (_, _, cache) = batchnorm_forward(&x, &gamma, &beta, &st, mode, 0.1, 1e-5).unwrap();
            let (gi, gg, gb) = batchnorm_backward(&r, &cache, &gamma).unwrap();
            let ei = gradient_check(|p| f(p, &gamma, &beta), &gi, &x, 1e-5).unwrap();
            let eg = gradient_check(|p| f(&x, p, &beta), &gg, &gamma, 1e-5).unwrap();
            let eb = gradient_check(|p| f(&x, &gamma, p), &gb, &beta, 1e-5).unwrap();
            assert!(ei < 1e-5 && eg < 1e-6 && eb < 1e-6, "{mode:?}: {ei} {eg} {eb}");
        }
    }
}
