//! Seeded synthetic video: a continuous textured scene sampled on a pixel grid
//! that translates at a constant velocity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
}

#[derive(Clone, Debug)]
struct Blob {
    cx: f64,
    cy: f64,
    radius: f64,
    softness: f64,
    contrast: f64,
    square: bool,
}

/// A continuous image `f(x, y)`: a sum of sinusoids below a cutoff frequency
/// plus soft-edged discs and squares, clamped to `[0, 1]`.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    waves: Vec<Wave>,
    blobs: Vec<Blob>,
}

impl SyntheticScene {
    pub const DEFAULT_MAX_FREQUENCY: f64 = 0.2;

    /// `max_frequency` is in cycles per pixel; `extent` is the region (in
    /// pixels, both axes) over which shapes are scattered.
    pub fn new(seed: u64, max_frequency: f64, extent: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_waves = 10;
        let waves = (0..n_waves)
            .map(|_| {
                let f = rng.random_range(0.01..max_frequency.max(0.011));
                let theta = rng.random_range(0.0..PI);
                Wave {
                    fx: f * theta.cos(),
                    fy: f * theta.sin(),
                    phase: rng.random_range(0.0..2.0 * PI),
                    amp: rng.random_range(0.3..1.0) * 0.35 / (n_waves as f64).sqrt(),
                }
            })
            .collect();
        let n_blobs = ((extent * extent) / 400.0).ceil().max(2.0) as usize;
        let blobs = (0..n_blobs)
            .map(|_| Blob {
                cx: rng.random_range(-0.25 * extent..1.25 * extent),
                cy: rng.random_range(-0.25 * extent..1.25 * extent),
                radius: rng.random_range(3.0..0.12 * extent + 4.0),
                softness: rng.random_range(0.8..2.0) / max_frequency.max(0.05) / 4.0,
                contrast: rng.random_range(-0.3..0.3),
                square: rng.random_bool(0.5),
            })
            .collect();
        SyntheticScene { waves, blobs }
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let mut v = 0.5;
        for w in &self.waves {
            v += w.amp * (2.0 * PI * (w.fx * x + w.fy * y) + w.phase).sin();
        }
        for b in &self.blobs {
            let (dx, dy) = (x - b.cx, y - b.cy);
            let d = if b.square {
                dx.abs().max(dy.abs())
            } else {
                (dx * dx + dy * dy).sqrt()
            };
            v += b.contrast * 0.5 * (1.0 - ((d - b.radius) / b.softness).tanh());
        }
        v.clamp(0.0, 1.0)
    }

    /// Frame `k` samples the scene at `(x - k*mx, y - k*my)`, so content moves
    /// by `motion` pixels per frame.
    pub fn render(&self, num_frames: usize, height: usize, width: usize, motion: (f64, f64)) -> Vec<Tensor> {
        (0..num_frames)
            .map(|k| {
                let (ox, oy) = (k as f64 * motion.0, k as f64 * motion.1);
                Tensor::from_fn(&[1, height, width], |i| {
                    let (y, x) = ((i / width) as f64, (i % width) as f64);
                    self.sample(x - ox, y - oy)
                })
            })
            .collect()
    }
}

/// `num_frames` frames of size `height x width`; `motion = (dx, dy)` in pixels
/// per frame.
pub fn synthetic_video(seed: u64, num_frames: usize, height: usize, width: usize, motion: (f64, f64)) -> Result<Vec<Tensor>> {
    synthetic_video_with(seed, num_frames, height, width, motion, SyntheticScene::DEFAULT_MAX_FREQUENCY)
}

pub fn synthetic_video_with(
    seed: u64,
    num_frames: usize,
    height: usize,
    width: usize,
    motion: (f64, f64),
    max_frequency: f64,
) -> Result<Vec<Tensor>> {
    if height < 16 || width < 16 {
        return Err(Error::config(format!("synthetic frames must be at least 16x16, got {height}x{width}")));
    }
    if num_frames == 0 {
        return Err(Error::config("synthetic video needs at least one frame"));
    }
    if !(max_frequency > 0.0 && max_frequency <= 0.5) {
        return Err(Error::config("max_frequency must lie in (0, 0.5] cycles per pixel"));
    }
    let scene = SyntheticScene::new(seed, max_frequency, height.max(width) as f64);
    Ok(scene.render(num_frames, height, width, motion))
}
