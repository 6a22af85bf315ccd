//! LR/HR sample synthesis: bicubic degradation, patch extraction and the
//! center-frame replication used by the temporal ablation.

use crate::data::resize::imresize_bicubic;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One training example: `F` degraded frames around a center frame and the
/// pristine center frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequenceSample {
    /// `(F, 1, H, W)`, upsampled back to the HR size.
    pub lr_frames: Tensor,
    /// `(1, H, W)`.
    pub hr_center: Tensor,
    pub scale: usize,
    pub source_id: String,
}

impl FrameSequenceSample {
    pub fn num_frames(&self) -> usize {
        self.lr_frames.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.hr_center.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.hr_center.shape()[2]
    }

    pub fn lr_frame(&self, k: usize) -> Tensor {
        self.lr_frames.index_outer(k)
    }

    pub fn center_index(&self) -> usize {
        self.num_frames() / 2
    }
}

fn frame_dims(frame: &Tensor) -> Result<(usize, usize)> {
    match *frame.shape() {
        [1, h, w] => Ok((h, w)),
        _ => Err(Error::shape(format!(
            "frames must be single-channel (1, H, W), got {:?}",
            frame.shape()
        ))),
    }
}

/// Center crop of a `(1, H, W)` frame.
pub fn center_crop(frame: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (h, w) = frame_dims(frame)?;
    if out_h > h || out_w > w || out_h == 0 || out_w == 0 {
        return Err(Error::config(format!("cannot crop {h}x{w} to {out_h}x{out_w}")));
    }
    crop(frame, (h - out_h) / 2, (w - out_w) / 2, out_h, out_w)
}

fn crop(frame: &Tensor, top: usize, left: usize, out_h: usize, out_w: usize) -> Result<Tensor> {
    let w = frame.shape()[2];
    let src = frame.data();
    let mut data = Vec::with_capacity(out_h * out_w);
    for y in top..top + out_h {
        data.extend_from_slice(&src[y * w + left..y * w + left + out_w]);
    }
    Tensor::new(&[1, out_h, out_w], data)
}

/// Degrades every frame by an antialiased bicubic downscale by `scale`
/// followed by a bicubic upscale to the original size, keeping the center
/// frame untouched as ground truth. Frames whose size is not a multiple of
/// `scale` are center-cropped to the largest multiple first. Degraded values
/// are clamped to `[0, 1]`.
pub fn synthesize_pair(hr_frames: &[Tensor], scale: usize, source_id: &str) -> Result<FrameSequenceSample> {
    if hr_frames.is_empty() || hr_frames.len() % 2 == 0 {
        return Err(Error::config(format!(
            "need an odd, non-zero number of frames, got {}",
            hr_frames.len()
        )));
    }
    if scale == 0 {
        return Err(Error::config("scale must be at least 1"));
    }
    let (h, w) = frame_dims(&hr_frames[0])?;
    for f in hr_frames {
        if frame_dims(f)? != (h, w) {
            return Err(Error::shape(format!(
                "frame sizes differ: {h}x{w} vs {:?}",
                f.shape()
            )));
        }
    }
    let (ch, cw) = (h / scale * scale, w / scale * scale);
    if ch == 0 || cw == 0 {
        return Err(Error::config(format!("{h}x{w} frames are smaller than scale {scale}")));
    }
    let mut lr = Vec::with_capacity(hr_frames.len() * ch * cw);
    let mut hr_center = None;
    for (k, f) in hr_frames.iter().enumerate() {
        let f = if (ch, cw) == (h, w) { f.clone() } else { center_crop(f, ch, cw)? };
        let small = imresize_bicubic(&f, ch / scale, cw / scale, true)?;
        let up = imresize_bicubic(&small, ch, cw, true)?;
        lr.extend(up.data().iter().map(|v| v.clamp(0.0, 1.0)));
        if k == hr_frames.len() / 2 {
            hr_center = Some(f);
        }
    }
    Ok(FrameSequenceSample {
        lr_frames: Tensor::new(&[hr_frames.len(), 1, ch, cw], lr)?,
        hr_center: hr_center.expect("center frame exists"),
        scale,
        source_id: source_id.to_string(),
    })
}

/// Aligned `patch x patch` crops on a regular grid with the given stride.
/// Crops that would extend past the frame are skipped.
pub fn extract_patches(sample: &FrameSequenceSample, patch: usize, stride: usize) -> Result<Vec<FrameSequenceSample>> {
    let (h, w) = (sample.height(), sample.width());
    if patch == 0 || stride == 0 {
        return Err(Error::config("patch size and stride must be at least 1"));
    }
    if patch > h || patch > w {
        return Err(Error::config(format!("patch {patch} does not fit in a {h}x{w} frame")));
    }
    let f = sample.num_frames();
    let frames: Vec<Tensor> = (0..f).map(|k| sample.lr_frame(k)).collect();
    let mut out = Vec::new();
    for top in (0..=h - patch).step_by(stride) {
        for left in (0..=w - patch).step_by(stride) {
            let mut lr = Vec::with_capacity(f * patch * patch);
            for fr in &frames {
                lr.extend_from_slice(crop(fr, top, left, patch, patch)?.data());
            }
            out.push(FrameSequenceSample {
                lr_frames: Tensor::new(&[f, 1, patch, patch], lr)?,
                hr_center: crop(&sample.hr_center, top, left, patch, patch)?,
                scale: sample.scale,
                source_id: format!("{}@{top},{left}", sample.source_id),
            });
        }
    }
    Ok(out)
}

/// Copies the center degraded frame into every time step.
pub fn replicate_center(sample: &FrameSequenceSample) -> FrameSequenceSample {
    let f = sample.num_frames();
    let center = sample.lr_frame(sample.center_index());
    let mut data = Vec::with_capacity(sample.lr_frames.numel());
    for _ in 0..f {
        data.extend_from_slice(center.data());
    }
    FrameSequenceSample {
        lr_frames: Tensor::new(sample.lr_frames.shape(), data).expect("shape preserved"),
        ..sample.clone()
    }
}

/// BT.601 luma of a `(3, H, W)` image, evaluated as
/// `G + 0.299 (R - G) + 0.114 (B - G)` so that gray pixels map to themselves exactly.
pub fn rgb_to_luminance(rgb: &Tensor) -> Result<Tensor> {
    let (h, w) = match *rgb.shape() {
        [3, h, w] => (h, w),
        _ => return Err(Error::shape(format!("expected (3, H, W), got {:?}", rgb.shape()))),
    };
    let n = h * w;
    let d = rgb.data();
    Tensor::new(
        &[1, h, w],
        (0..n)
            .map(|i| {
                let g = d[n + i];
                g + 0.299 * (d[i] - g) + 0.114 * (d[2 * n + i] - g)
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::synthetic_video;
    use crate::metrics::psnr;

    fn frames(n: usize, h: usize, w: usize) -> Vec<Tensor> {
        (0..n)
            .map(|k| Tensor::from_fn(&[1, h, w], |i| ((i * 7 + k * 13) % 23) as f64 / 22.0))
            .collect()
    }

    #[test]
    fn constant_video_survives_degradation() {
        let v: Vec<Tensor> = (0..5).map(|_| Tensor::full(&[1, 24, 24], 0.6)).collect();
        let s = synthesize_pair(&v, 4, "c").unwrap();
        assert!(s.lr_frames.data().iter().all(|&x| x == 0.6));
        assert_eq!(s.hr_center, v[2]);
    }

    #[test]
    fn scale_one_is_identity() {
        let v = frames(5, 10, 12);
        let s = synthesize_pair(&v, 1, "id").unwrap();
        for (k, f) in v.iter().enumerate() {
            assert_eq!(&s.lr_frame(k), f);
        }
    }

    #[test]
    fn larger_scale_degrades_more() {
        let v = synthetic_video(11, 5, 48, 48, (0.5, 0.0)).unwrap();
        let p2 = synthesize_pair(&v, 2, "a").unwrap();
        let p4 = synthesize_pair(&v, 4, "a").unwrap();
        let q2 = psnr(&p2.hr_center, &p2.lr_frame(2), 1.0, 0).unwrap();
        let q4 = psnr(&p4.hr_center, &p4.lr_frame(2), 1.0, 0).unwrap();
        assert!(q2.is_finite() && q4.is_finite());
        assert!(q4 < q2, "{q4} vs {q2}");
    }

    #[test]
    fn non_multiple_frames_are_center_cropped() {
        let v = frames(5, 26, 23);
        let s = synthesize_pair(&v, 4, "x").unwrap();
        assert_eq!(s.hr_center.shape(), &[1, 24, 20]);
        assert_eq!(s.hr_center, center_crop(&v[2], 24, 20).unwrap());
    }

    #[test]
    fn mismatched_frames_rejected() {
        let mut v = frames(5, 16, 16);
        v[3] = Tensor::zeros(&[1, 16, 8]);
        assert!(matches!(synthesize_pair(&v, 2, "x"), Err(Error::Shape(_))));
    }

    #[test]
    fn patch_grid_counts_and_alignment() {
        let s = synthesize_pair(&frames(5, 72, 72), 2, "g").unwrap();
        assert_eq!(extract_patches(&s, 36, 36).unwrap().len(), 4);
        let ps = extract_patches(&s, 36, 18).unwrap();
        assert_eq!(ps.len(), 9);
        let p = &ps[4];
        for y in 0..36 {
            for x in 0..36 {
                let src = (18 + y) * 72 + 18 + x;
                assert_eq!(p.hr_center.data()[y * 36 + x], s.hr_center.data()[src]);
                assert_eq!(p.lr_frames.data()[36 * 36 + y * 36 + x], s.lr_frames.data()[72 * 72 + src]);
            }
        }
        assert!(extract_patches(&s, 73, 1).is_err());
    }

    #[test]
    fn replicate_center_definition() {
        let s = synthesize_pair(&frames(5, 8, 8), 1, "r").unwrap();
        let r = replicate_center(&s);
        for k in 0..5 {
            assert_eq!(r.lr_frame(k), s.lr_frame(2));
        }
        assert_eq!(r.hr_center, s.hr_center);
        assert_eq!(replicate_center(&r), r);
    }

    #[test]
    fn luminance_coefficients() {
        let px = |r: f64, g: f64, b: f64| Tensor::new(&[3, 1, 1], vec![r, g, b]).unwrap();
        assert_eq!(rgb_to_luminance(&px(1.0, 1.0, 1.0)).unwrap().data()[0], 1.0);
        let green = rgb_to_luminance(&px(0.0, 1.0, 0.0)).unwrap().data()[0];
        assert!((green - 0.587).abs() < 1e-15);
        let mixed = rgb_to_luminance(&px(0.2, 0.5, 0.9)).unwrap().data()[0];
        assert!((mixed - (0.299 * 0.2 + 0.587 * 0.5 + 0.114 * 0.9)).abs() < 1e-15);
        for v in [0.0, 0.3, 0.77, 1.0] {
            assert_eq!(rgb_to_luminance(&px(v, v, v)).unwrap().data()[0], v);
        }
    }
}
