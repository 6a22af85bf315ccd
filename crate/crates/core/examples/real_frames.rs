//! Build a dataset from a directory of PGM/PPM frames and super-resolve the
//! center of the first five. Without an argument a short synthetic clip is
//! written to a temporary directory first.

use std::path::PathBuf;

use vsrgan::data::{dataset_from_frame_dir, image_io, synthetic_video};
use vsrgan::{Generator, GeneratorConfig, Tensor};

fn main() -> vsrgan::Result<()> {
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            let dir = std::env::temp_dir().join("vsrgan-frames");
            std::fs::create_dir_all(&dir)?;
            for (i, f) in synthetic_video(5, 7, 72, 72, (1.0, 0.5))?.iter().enumerate() {
                image_io::write_pnm(dir.join(format!("frame{i:03}.pgm")), f, 8)?;
            }
            dir
        }
    };
    let data = dataset_from_frame_dir(&dir, 2, 36, 36, 5)?;
    println!("{} training samples from {}", data.len(), dir.display());

    let frames: Vec<Tensor> = image_io::list_frames(&dir)?
        .iter()
        .take(5)
        .map(image_io::read_luminance)
        .collect::<vsrgan::Result<_>>()?;
    let (h, w) = (frames[0].shape()[1], frames[0].shape()[2]);
    let refs: Vec<&Tensor> = frames.iter().collect();
    let input = Tensor::stack(&refs)?.reshape(&[1, 5, 1, h, w])?;
    let g = Generator::passthrough(GeneratorConfig::default())?;
    let out = g.infer(&input)?.reshape(&[1, h, w])?;
    let path = std::env::temp_dir().join("vsrgan-center.pgm");
    image_io::write_pnm(&path, &out.map(|v| v.clamp(0.0, 1.0)), 16)?;
    println!("wrote {}", path.display());
    Ok(())
}
