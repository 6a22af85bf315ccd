//! Packed sample datasets.
//!
//! The `.vsrd` file holds, little-endian: `"VSRD"`, then u32 version, scale,
//! patch size, frame count `F` and sample count, then per sample `F*N*N` LR
//! values followed by `N*N` HR values as f32. A TOML manifest with the same
//! stem lists the samples and how the set was created.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Reader;
use crate::data::image_io::{list_frames, read_luminance};
use crate::data::pipeline::{extract_patches, synthesize_pair, FrameSequenceSample};
use crate::data::synthetic::{synthetic_video_with, SyntheticScene};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"VSRD";
pub const VERSION: u32 = 1;
pub const SUPPORTED_SCALES: [usize; 4] = [1, 2, 3, 4];

/// Where the HR frames of a dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic {
        seed: u64,
        video_frames: usize,
        size: usize,
        motion: [f64; 2],
        max_frequency: f64,
    },
    Frames {
        directory: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub index: usize,
    pub source_id: String,
    /// Byte offset of the sample block in the packed file.
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub data_file: String,
    pub scale: usize,
    pub patch: usize,
    pub frames: usize,
    pub stride: usize,
    pub sample_count: usize,
    pub creation: DatasetSource,
    pub samples: Vec<SampleRecord>,
}

/// Parameters of a synthetic dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    /// Length of the synthetic video; every window of `window` consecutive
    /// frames yields one group of patches.
    pub video_frames: usize,
    pub size: usize,
    pub motion: (f64, f64),
    pub max_frequency: f64,
    pub scale: usize,
    pub patch: usize,
    pub stride: usize,
    pub window: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            video_frames: 16,
            size: 72,
            motion: (0.5, 0.25),
            max_frequency: SyntheticScene::DEFAULT_MAX_FREQUENCY,
            scale: 2,
            patch: 36,
            stride: 36,
            window: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub scale: usize,
    pub patch: usize,
    pub frames: usize,
    pub stride: usize,
    pub creation: DatasetSource,
    pub samples: Vec<FrameSequenceSample>,
}

fn check_scale(scale: usize) -> Result<()> {
    if SUPPORTED_SCALES.contains(&scale) {
        Ok(())
    } else {
        Err(Error::config(format!("scale must be one of {SUPPORTED_SCALES:?}, got {scale}")))
    }
}

fn round_to_f32(t: &Tensor) -> Tensor {
    t.map(|v| v as f32 as f64)
}

/// Degrades sliding `window`-frame groups of `hr_frames` and cuts them into
/// patches. Values are rounded to f32 so the in-memory set equals its packed
/// form.
pub fn build_dataset(
    hr_frames: &[Tensor],
    scale: usize,
    patch: usize,
    stride: usize,
    window: usize,
    creation: DatasetSource,
) -> Result<Dataset> {
    check_scale(scale)?;
    if window == 0 || window % 2 == 0 {
        return Err(Error::config(format!("window must be odd, got {window}")));
    }
    if hr_frames.len() < window {
        return Err(Error::config(format!(
            "{} frames are too few for a {window}-frame window",
            hr_frames.len()
        )));
    }
    let groups: Vec<Vec<FrameSequenceSample>> = (0..=hr_frames.len() - window)
        .into_par_iter()
        .map(|start| {
            let id = format!("t{:04}", start + window / 2);
            let full = synthesize_pair(&hr_frames[start..start + window], scale, &id)?;
            extract_patches(&full, patch, stride)
        })
        .collect::<Result<_>>()?;
    let samples = groups
        .into_iter()
        .flatten()
        .map(|s| FrameSequenceSample {
            lr_frames: round_to_f32(&s.lr_frames),
            hr_center: round_to_f32(&s.hr_center),
            ..s
        })
        .collect();
    Ok(Dataset {
        scale,
        patch,
        frames: window,
        stride,
        creation,
        samples,
    })
}

pub fn synth_dataset(p: &SynthParams) -> Result<Dataset> {
    let video = synthetic_video_with(p.seed, p.video_frames, p.size, p.size, p.motion, p.max_frequency)?;
    let creation = DatasetSource::Synthetic {
        seed: p.seed,
        video_frames: p.video_frames,
        size: p.size,
        motion: [p.motion.0, p.motion.1],
        max_frequency: p.max_frequency,
    };
    build_dataset(&video, p.scale, p.patch, p.stride, p.window, creation)
}

/// Builds a dataset from a directory of PGM/PPM frames (converted to luminance).
pub fn dataset_from_frame_dir(dir: impl AsRef<Path>, scale: usize, patch: usize, stride: usize, window: usize) -> Result<Dataset> {
    let dir = dir.as_ref();
    let frames = list_frames(dir)?
        .iter()
        .map(read_luminance)
        .collect::<Result<Vec<_>>>()?;
    let creation = DatasetSource::Frames {
        directory: dir.display().to_string(),
    };
    build_dataset(&frames, scale, patch, stride, window, creation)
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn header_len() -> usize {
        4 + 4 * 5
    }

    fn block_len(&self) -> usize {
        (self.frames + 1) * self.patch * self.patch * 4
    }

    /// Stacks the chosen samples into `(B, F, 1, N, N)` inputs and
    /// `(B, 1, N, N)` targets.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        if indices.is_empty() {
            return Err(Error::config("empty batch"));
        }
        let n = self.patch;
        let mut lr = Vec::with_capacity(indices.len() * self.frames * n * n);
        let mut hr = Vec::with_capacity(indices.len() * n * n);
        for &i in indices {
            let s = self
                .samples
                .get(i)
                .ok_or_else(|| Error::config(format!("sample index {i} out of range")))?;
            lr.extend_from_slice(s.lr_frames.data());
            hr.extend_from_slice(s.hr_center.data());
        }
        let b = indices.len();
        Ok((
            Tensor::new(&[b, self.frames, 1, n, n], lr)?,
            Tensor::new(&[b, 1, n, n], hr)?,
        ))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::header_len() + self.len() * self.block_len());
        out.extend_from_slice(MAGIC);
        for v in [VERSION, self.scale as u32, self.patch as u32, self.frames as u32, self.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for s in &self.samples {
            for v in s.lr_frames.data().iter().chain(s.hr_center.data()) {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    /// Decodes a packed file. `manifest` supplies source ids and creation
    /// parameters when available.
    pub fn from_bytes(bytes: &[u8], manifest: Option<&DatasetManifest>) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, not a VSRD dataset".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let (scale, patch, frames, count) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        if patch == 0 || frames == 0 {
            return Err(Error::Format("dataset header has zero patch size or frame count".into()));
        }
        if let Some(m) = manifest {
            if (m.scale, m.patch, m.frames, m.sample_count) != (scale, patch, frames, count) || m.samples.len() != count {
                return Err(Error::Format("manifest disagrees with the packed dataset header".into()));
            }
        }
        let n2 = patch * patch;
        let mut samples = Vec::with_capacity(count);
        for i in 0..count {
            let block = r.take((frames + 1) * n2 * 4)?;
            let vals: Vec<f64> = block
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            let source_id = manifest.map_or_else(|| format!("sample{i}"), |m| m.samples[i].source_id.clone());
            samples.push(FrameSequenceSample {
                lr_frames: Tensor::new(&[frames, 1, patch, patch], vals[..frames * n2].to_vec())?,
                hr_center: Tensor::new(&[1, patch, patch], vals[frames * n2..].to_vec())?,
                scale,
                source_id,
            });
        }
        if !r.is_empty() {
            return Err(Error::Format("trailing bytes after the last sample".into()));
        }
        Ok(Dataset {
            scale,
            patch,
            frames,
            stride: manifest.map_or(patch, |m| m.stride),
            creation: manifest.map_or_else(
                || DatasetSource::Frames {
                    directory: String::new(),
                },
                |m| m.creation.clone(),
            ),
            samples,
        })
    }

    pub fn manifest(&self, data_file: &str) -> DatasetManifest {
        let header = Self::header_len() as u64;
        let block = self.block_len() as u64;
        DatasetManifest {
            format: "VSRD".into(),
            version: VERSION,
            data_file: data_file.to_string(),
            scale: self.scale,
            patch: self.patch,
            frames: self.frames,
            stride: self.stride,
            sample_count: self.len(),
            creation: self.creation.clone(),
            samples: self
                .samples
                .iter()
                .enumerate()
                .map(|(i, s)| SampleRecord {
                    index: i,
                    source_id: s.source_id.clone(),
                    offset: header + i as u64 * block,
                })
                .collect(),
        }
    }

    /// Path of the manifest belonging to a packed file.
    pub fn manifest_path(data_path: &Path) -> PathBuf {
        data_path.with_extension("toml")
    }

    /// Writes the packed file and its manifest; returns the manifest path.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<PathBuf> {
        let path = path.as_ref();
        let file_name = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::config(format!("bad dataset path {}", path.display())))?;
        let manifest = toml::to_string(&self.manifest(file_name))
            .map_err(|e| Error::Format(format!("cannot serialize manifest: {e}")))?;
        fs::write(path, self.to_bytes())?;
        let mpath = Self::manifest_path(path);
        fs::write(&mpath, manifest)?;
        Ok(mpath)
    }

    /// Loads a packed file, using its manifest when present.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::Format(format!("cannot read dataset {}: {e}", path.display())))?;
        let mpath = Self::manifest_path(path);
        let manifest = if mpath.exists() {
            let text = fs::read_to_string(&mpath)?;
            Some(
                toml::from_str::<DatasetManifest>(&text)
                    .map_err(|e| Error::Format(format!("{}: {e}", mpath.display())))?,
            )
        } else {
            None
        };
        Self::from_bytes(&bytes, manifest.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        synth_dataset(&SynthParams {
            video_frames: 6,
            size: 32,
            patch: 16,
            stride: 16,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn window_and_grid_arithmetic() {
        let d = synth_dataset(&SynthParams::default()).unwrap();
        assert_eq!(d.len(), 48);
        assert_eq!(small().len(), 2 * 4);
    }

    #[test]
    fn bytes_round_trip() {
        let d = small();
        let bytes = d.to_bytes();
        let m = d.manifest("x.vsrd");
        let back = Dataset::from_bytes(&bytes, Some(&m)).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn batches_stack_samples() {
        let d = small();
        let (x, y) = d.batch(&[3, 0]).unwrap();
        assert_eq!(x.shape(), &[2, 5, 1, 16, 16]);
        assert_eq!(y.index_outer(0), d.samples[3].hr_center.clone().reshape(&[1, 16, 16]).unwrap());
        assert!(d.batch(&[99]).is_err());
    }

    #[test]
    fn invalid_scale_is_a_config_error() {
        let p = SynthParams { scale: 5, ..Default::default() };
        assert!(matches!(synth_dataset(&p), Err(Error::Config(_))));
    }
}
