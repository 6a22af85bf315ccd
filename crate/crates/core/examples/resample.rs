//! Degrade a synthetic frame with bicubic downscaling, then upscale it back and
//! measure what was lost at each scale.

use vsrgan::data::{imresize_bicubic, synthetic_video};
use vsrgan::metrics::{psnr, ssim};

fn main() -> vsrgan::Result<()> {
    let frames = synthetic_video(3, 1, 96, 96, (0.0, 0.0))?;
    let hr = &frames[0];
    println!("scale  lr size  psnr (dB)  ssim");
    for scale in 2..=4 {
        let lr = imresize_bicubic(hr, 96 / scale, 96 / scale, true)?;
        let up = imresize_bicubic(&lr, 96, 96, true)?;
        println!(
            "x{scale}     {:>2}x{:<2}    {:>8.3}  {:.4}",
            lr.shape()[1],
            lr.shape()[2],
            psnr(hr, &up, 1.0, scale)?,
            ssim(hr, &up, 1.0, scale)?
        );
    }
    Ok(())
}
