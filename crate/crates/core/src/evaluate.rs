//! Dataset-level evaluation of a generator.

use crate::data::{replicate_center, Dataset, FrameSequenceSample};
use crate::error::{Error, Result};
use crate::metrics::{feature_distance, psnr, ssim, EvalReport, EvalRow};
use crate::models::{FeatureNet, Generator};
use crate::tensor::Tensor;

const EVAL_BATCH: usize = 16;

/// PSNR, SSIM and feature distance of the generator's output against every
/// HR patch. With `center_frame_only` each input sequence is replaced by five
/// copies of its center frame first.
pub fn evaluate(
    generator: &Generator,
    data: &Dataset,
    feature_net: &FeatureNet,
    crop: usize,
    center_frame_only: bool,
    model: &str,
) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::config("evaluation dataset is empty"));
    }
    let mut rows = Vec::with_capacity(data.len());
    for chunk in data.samples.chunks(EVAL_BATCH) {
        let samples: Vec<FrameSequenceSample> = if center_frame_only {
            chunk.iter().map(replicate_center).collect()
        } else {
            chunk.to_vec()
        };
        let frames: Vec<&Tensor> = samples.iter().map(|s| &s.lr_frames).collect();
        let out = generator.infer(&Tensor::stack(&frames)?)?;
        for (i, s) in samples.iter().enumerate() {
            let xhat = out.index_outer(i);
            let x = &s.hr_center;
            let (h, w) = (x.shape()[1], x.shape()[2]);
            let as_batch = |t: &Tensor| t.clone().reshape(&[1, 1, h, w]);
            rows.push(EvalRow {
                frame_id: s.source_id.clone(),
                psnr: psnr(x, &xhat, 1.0, crop)?,
                ssim: ssim(x, &xhat, 1.0, crop)?,
                featdist: feature_distance(&as_batch(x)?, &as_batch(&xhat)?, feature_net)?,
            });
        }
    }
    EvalReport::new(model, data.scale, crop, center_frame_only, rows)
}
