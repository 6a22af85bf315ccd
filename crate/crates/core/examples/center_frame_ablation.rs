//! How much do the neighboring frames help? Evaluate a trained generator on
//! full sequences and on sequences made of five copies of the center frame.

use vsrgan::data::{synth_dataset, SynthParams};
use vsrgan::evaluate::evaluate;
use vsrgan::training::{pretrain, RunOptions, TrainConfig};
use vsrgan::{FeatureNet, FeatureNetSpec, Generator, GeneratorConfig};

fn main() -> vsrgan::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(60);
    let train = synth_dataset(&SynthParams::default())?;
    let test = synth_dataset(&SynthParams { seed: 9, video_frames: 8, ..Default::default() })?;
    let cfg = TrainConfig { batch_size: 12, pretrain_epochs: epochs, lr_drop_epochs: vec![epochs * 3 / 4], ..Default::default() };
    let mut g = Generator::new(GeneratorConfig { base_channels: 16, num_res_blocks: 3, ..Default::default() }, 7)?;
    pretrain(&mut g, &train, &cfg, &RunOptions::default())?;

    let f = FeatureNet::new(FeatureNetSpec::default())?;
    for (name, data) in [("train", &train), ("held-out", &test)] {
        let full = evaluate(&g, data, &f, data.scale, false, "full")?;
        let center = evaluate(&g, data, &f, data.scale, true, "center")?;
        println!(
            "{name:<8}  full {:.2} dB / {:.4}   center only {:.2} dB / {:.4}   gap {:.2} dB",
            full.mean_psnr,
            full.mean_ssim,
            center.mean_psnr,
            center.mean_ssim,
            full.mean_psnr - center.mean_psnr
        );
    }
    Ok(())
}
