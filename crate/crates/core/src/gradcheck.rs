//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Floor of the relative-error denominator.
pub const REL_FLOOR: f64 = 1e-12;

/// `|a - n| / max(|a|, |n|, 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Maximum relative error between `analytic` and the central difference
/// `(f(p + h e_i) - f(p - h e_i)) / 2h` over every coordinate of `point`.
pub fn gradient_check<F>(f: F, analytic: &Tensor, point: &Tensor, h: f64) -> Result<f64>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    let coords: Vec<usize> = (0..point.numel()).collect();
    gradient_check_at(f, analytic, point, h, &coords)
}

/// Like [`gradient_check`], restricted to the listed flat coordinates.
pub fn gradient_check_at<F>(
    mut f: F,
    analytic: &Tensor,
    point: &Tensor,
    h: f64,
    coords: &[usize],
) -> Result<f64>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    analytic.same_shape(point, "gradient_check analytic gradient")?;
    let mut probe = point.clone();
    let mut worst: f64 = 0.0;
    for &i in coords {
        let x0 = point.data()[i];
        probe.data_mut()[i] = x0 + h;
        let plus = f(&probe)?;
        probe.data_mut()[i] = x0 - h;
        let minus = f(&probe)?;
        probe.data_mut()[i] = x0;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "function is not finite near coordinate {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * h);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

/// `count` distinct coordinates in `0..numel`, spread deterministically.
pub fn sample_coords(numel: usize, count: usize, seed: u64) -> Vec<usize> {
    use rand::seq::index::sample;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, numel, count.min(numel)).into_vec();
    picked.sort_unstable();
    picked
}
