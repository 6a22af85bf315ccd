//! Frame degradation, patching, synthetic video and dataset files.

pub mod dataset;
pub mod image_io;
pub mod pipeline;
pub mod resize;
pub mod synthetic;

pub use dataset::{build_dataset, dataset_from_frame_dir, synth_dataset, Dataset, DatasetManifest, DatasetSource, SynthParams};
pub use image_io::{read_luminance, read_pnm, write_pnm};
pub use pipeline::{extract_patches, replicate_center, rgb_to_luminance, synthesize_pair, FrameSequenceSample};
pub use resize::{cubic_kernel, imresize_bicubic};
pub use synthetic::{synthetic_video, synthetic_video_with, SyntheticScene};
