//! PSNR, SSIM and the feature distance on progressively noisier copies of an image.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vsrgan::data::synthetic_video;
use vsrgan::metrics::{feature_distance, psnr, ssim, FEATURE_DISTANCE_LABEL};
use vsrgan::{FeatureNet, FeatureNetSpec, Tensor};

fn main() -> vsrgan::Result<()> {
    let x = synthetic_video(1, 1, 64, 64, (0.0, 0.0))?.remove(0);
    let net = FeatureNet::new(FeatureNetSpec::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let noise = Tensor::randn(x.shape(), 1.0, &mut rng);
    let batch = |t: &Tensor| t.clone().reshape(&[1, 1, 64, 64]);
    println!("sigma    psnr (dB)  ssim    {FEATURE_DISTANCE_LABEL}");
    for sigma in [0.0, 0.01, 0.03, 0.1, 0.3] {
        let y = x.zip_map(&noise, |a, n| a + sigma * n)?;
        println!(
            "{sigma:<6}  {:>9.3}  {:.4}  {:.6}",
            psnr(&x, &y, 1.0, 2)?,
            ssim(&x, &y, 1.0, 2)?,
            feature_distance(&batch(&x)?, &batch(&y)?, &net)?
        );
    }
    Ok(())
}
