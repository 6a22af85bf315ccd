//! Bicubic resampling in the style of MATLAB's `imresize`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Cubic convolution kernel with `a = -0.5`.
pub fn cubic_kernel(x: f64) -> f64 {
    let ax = x.abs();
    let ax2 = ax * ax;
    let ax3 = ax2 * ax;
    if ax <= 1.0 {
        1.5 * ax3 - 2.5 * ax2 + 1.0
    } else if ax < 2.0 {
        -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    } else {
        0.0
    }
}

/// Contributions of source samples to one destination sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Taps {
    /// Source index nearest to the destination's source coordinate.
    pub anchor: usize,
    /// `(source index, weight)`, indices clamped into range, weights summing to 1.
    pub weights: Vec<(usize, f64)>,
}

/// Per-destination tap table for resampling an axis of length `in_len` to `out_len`.
pub fn resize_taps(in_len: usize, out_len: usize, antialias: bool) -> Vec<Taps> {
    let s = out_len as f64 / in_len as f64;
    let k = if antialias && s < 1.0 { s } else { 1.0 };
    let width = 4.0 / k;
    let span = width.ceil() as i64 + 2;
    let last = in_len as i64 - 1;
    (0..out_len)
        .map(|i| {
            let u = (i as f64 + 0.5) / s - 0.5;
            let left = (u - width / 2.0).floor() as i64;
            let mut weights: Vec<(usize, f64)> = Vec::with_capacity(span as usize);
            for j in left..left + span {
                let w = k * cubic_kernel(k * (u - j as f64));
                if w == 0.0 {
                    continue;
                }
                let idx = j.clamp(0, last) as usize;
                match weights.iter_mut().find(|(n, _)| *n == idx) {
                    Some(entry) => entry.1 += w,
                    None => weights.push((idx, w)),
                }
            }
            let total: f64 = weights.iter().map(|(_, w)| w).sum();
            for entry in &mut weights {
                entry.1 /= total;
            }
            Taps {
                anchor: (u.round() as i64).clamp(0, last) as usize,
                weights,
            }
        })
        .collect()
}

/// Resamples along one axis of a row-major `(outer, len, inner)` block.
///
/// Each output is written as `x[anchor] + sum w_j (x[j] - x[anchor])`, which
/// equals the plain weighted sum because the weights sum to one, and makes
/// constant signals exact fixed points.
fn resample_axis(data: &[f64], outer: usize, len: usize, inner: usize, taps: &[Taps]) -> Vec<f64> {
    let out_len = taps.len();
    let mut out = vec![0.0; outer * out_len * inner];
    for o in 0..outer {
        let src = &data[o * len * inner..(o + 1) * len * inner];
        let dst = &mut out[o * out_len * inner..(o + 1) * out_len * inner];
        for (i, t) in taps.iter().enumerate() {
            for c in 0..inner {
                let base = src[t.anchor * inner + c];
                let mut acc = 0.0;
                for &(j, w) in &t.weights {
                    acc += w * (src[j * inner + c] - base);
                }
                dst[i * inner + c] = base + acc;
            }
        }
    }
    out
}

/// Resizes every channel of a `(C, H, W)` image. Rows (the height axis) are
/// resampled first, then columns.
pub fn imresize_bicubic(image: &Tensor, out_h: usize, out_w: usize, antialias: bool) -> Result<Tensor> {
    let [c, h, w] = match *image.shape() {
        [c, h, w] => [c, h, w],
        _ => {
            return Err(Error::shape(format!(
                "imresize expects (channels, height, width), got {:?}",
                image.shape()
            )))
        }
    };
    if out_h == 0 || out_w == 0 {
        return Err(Error::config("resize target must be at least 1x1"));
    }
    let rows = resize_taps(h, out_h, antialias);
    let cols = resize_taps(w, out_w, antialias);
    let tmp = resample_axis(image.data(), c, h, w, &rows);
    let out = resample_axis(&tmp, c * out_h, w, 1, &cols);
    Tensor::new(&[c, out_h, out_w], out)
}
