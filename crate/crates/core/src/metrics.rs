//! Full-reference quality metrics and evaluation reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::FeatureNet;
use crate::tensor::Tensor;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
/// Label attached to the feature-space distance wherever it is reported.
pub const FEATURE_DISTANCE_LABEL: &str = "feature_distance (proxy)";

/// Splits a tensor of rank >= 2 into `(planes, H, W)`.
fn planes(t: &Tensor) -> Result<(usize, usize, usize)> {
    let s = t.shape();
    if s.len() < 2 {
        return Err(Error::shape(format!("image metrics need rank >= 2, got {s:?}")));
    }
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    Ok((t.numel() / (h * w), h, w))
}

fn check_pair(x: &Tensor, xhat: &Tensor, crop: usize) -> Result<(usize, usize, usize)> {
    x.same_shape(xhat, "metric inputs")?;
    let (p, h, w) = planes(x)?;
    if 2 * crop >= h.min(w) {
        return Err(Error::config(format!("crop {crop} leaves nothing of a {h}x{w} image")));
    }
    Ok((p, h, w))
}

/// Iterates the cropped pixels of every plane as `(x, xhat)` pairs.
fn cropped<'a>(x: &'a Tensor, xhat: &'a Tensor, dims: (usize, usize, usize), crop: usize) -> impl Iterator<Item = (f64, f64)> + 'a {
    let (p, h, w) = dims;
    (0..p).flat_map(move |k| {
        (crop..h - crop).flat_map(move |y| {
            (crop..w - crop).map(move |c| {
                let i = (k * h + y) * w + c;
                (x.data()[i], xhat.data()[i])
            })
        })
    })
}

/// Peak signal-to-noise ratio in dB after removing `crop` border pixels;
/// `+inf` for identical images.
pub fn psnr(x: &Tensor, xhat: &Tensor, peak: f64, crop: usize) -> Result<f64> {
    let dims = check_pair(x, xhat, crop)?;
    if !(peak > 0.0) {
        return Err(Error::config("psnr peak must be positive"));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for (a, b) in cropped(x, xhat, dims, crop) {
        sum += (a - b) * (a - b);
        n += 1;
    }
    let mse = sum / n as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { 10.0 * (peak * peak / mse).log10() })
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of an `h x w` plane.
fn filter_valid(img: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|j| g[j] * img[y * w + x + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|j| g[j] * rows[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// Mean single-scale SSIM (11x11 Gaussian window, sigma 1.5) over valid
/// window positions, averaged over planes.
pub fn ssim(x: &Tensor, xhat: &Tensor, peak: f64, crop: usize) -> Result<f64> {
    let dims = check_pair(x, xhat, crop)?;
    let (p, h, w) = dims;
    let (ch, cw) = (h - 2 * crop, w - 2 * crop);
    if ch < SSIM_WINDOW || cw < SSIM_WINDOW {
        return Err(Error::config(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels after cropping, got {ch}x{cw}"
        )));
    }
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let g = gaussian_window();
    let pixels: Vec<(f64, f64)> = cropped(x, xhat, dims, crop).collect();
    let mut total = 0.0;
    for k in 0..p {
        let plane = &pixels[k * ch * cw..(k + 1) * ch * cw];
        let a: Vec<f64> = plane.iter().map(|v| v.0).collect();
        let b: Vec<f64> = plane.iter().map(|v| v.1).collect();
        let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { plane.iter().map(|&(u, v)| f(u, v)).collect() };
        let mu_a = filter_valid(&a, ch, cw, &g);
        let mu_b = filter_valid(&b, ch, cw, &g);
        let e_aa = filter_valid(&prod(&|u, _| u * u), ch, cw, &g);
        let e_bb = filter_valid(&prod(&|_, v| v * v), ch, cw, &g);
        let e_ab = filter_valid(&prod(&|u, v| u * v), ch, cw, &g);
        let mut acc = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += acc / mu_a.len() as f64;
    }
    Ok(total / p as f64)
}

/// Mean squared difference of unit-normalized feature vectors (one vector of
/// channels per spatial site), averaged over sites and then over taps.
/// Inputs are `(B, 1, H, W)` images.
pub fn feature_distance(x: &Tensor, xhat: &Tensor, net: &FeatureNet) -> Result<f64> {
    x.same_shape(xhat, "feature distance inputs")?;
    let fa = net.infer(x)?;
    let fb = net.infer(xhat)?;
    let mut total = 0.0;
    for (ta, tb) in fa.iter().zip(&fb) {
        let (b, c, h, w) = ta.dims4()?;
        let hw = h * w;
        let (da, db) = (ta.data(), tb.data());
        let mut acc = 0.0;
        for n in 0..b {
            for s in 0..hw {
                let at = |d: &[f64], ch: usize| d[(n * c + ch) * hw + s];
                let norm_a = (0..c).map(|ch| at(da, ch).powi(2)).sum::<f64>().sqrt() + 1e-10;
                let norm_b = (0..c).map(|ch| at(db, ch).powi(2)).sum::<f64>().sqrt() + 1e-10;
                acc += (0..c)
                    .map(|ch| (at(da, ch) / norm_a - at(db, ch) / norm_b).powi(2))
                    .sum::<f64>();
            }
        }
        total += acc / (b * hw) as f64;
    }
    Ok(total / fa.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub frame_id: String,
    pub psnr: f64,
    pub ssim: f64,
    pub featdist: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub scale: usize,
    pub crop: usize,
    pub center_frame_only: bool,
    pub feature_metric: String,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub mean_featdist: f64,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn new(model: &str, scale: usize, crop: usize, center_frame_only: bool, rows: Vec<EvalRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::config("evaluation produced no rows"));
        }
        let n = rows.len() as f64;
        let mean = |f: fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        Ok(EvalReport {
            model: model.to_string(),
            scale,
            crop,
            center_frame_only,
            feature_metric: FEATURE_DISTANCE_LABEL.to_string(),
            mean_psnr: mean(|r| r.psnr),
            mean_ssim: mean(|r| r.ssim),
            mean_featdist: mean(|r| r.featdist),
            rows,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_id,psnr,ssim,featdist\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.frame_id, r.psnr, r.ssim, r.featdist));
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "{} samples  PSNR {:.4} dB  SSIM {:.6}  {} {:.6}  (crop {}, scale {}{})",
            self.rows.len(),
            self.mean_psnr,
            self.mean_ssim,
            self.feature_metric,
            self.mean_featdist,
            self.crop,
            self.scale,
            if self.center_frame_only { ", center frame only" } else { "" }
        )
    }
}
