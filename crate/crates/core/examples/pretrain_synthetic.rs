//! Pixel-loss pretraining of a small generator on seeded synthetic video,
//! compared with plain bicubic upscaling. Pass an epoch count to shorten the
//! run (default 125, about 500 iterations).

use vsrgan::data::{synth_dataset, SynthParams};
use vsrgan::training::{dataset_psnr, pretrain, RunOptions, TrainConfig};
use vsrgan::{Checkpoint, Generator, GeneratorConfig};

fn main() -> vsrgan::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(125);
    let data = synth_dataset(&SynthParams::default())?;
    let gcfg = GeneratorConfig { base_channels: 16, num_res_blocks: 3, ..Default::default() };
    let cfg = TrainConfig {
        batch_size: 12,
        pretrain_epochs: epochs,
        lr_drop_epochs: [epochs * 3 / 5, epochs * 22 / 25].into_iter().filter(|&e| e > 0 && e < epochs).collect(),
        ..Default::default()
    };
    let bicubic = dataset_psnr(&Generator::passthrough(gcfg.clone())?, &data, 16)?;
    let mut g = Generator::new(gcfg, 7)?;
    println!("{} samples; bicubic {bicubic:.2} dB; initial {:.2} dB", data.len(), dataset_psnr(&g, &data, 16)?);

    let start = std::time::Instant::now();
    let out = pretrain(&mut g, &data, &cfg, &RunOptions::default())?;
    for r in out.log.records.iter().filter(|r| r.step % 50 == 0) {
        println!("step {:>4}  lr {:.0e}  mse {:.3e}", r.step, r.lr, r.loss_g);
    }
    println!(
        "{} steps in {:.0} s; train-set PSNR {:.2} dB",
        out.steps,
        start.elapsed().as_secs_f64(),
        dataset_psnr(&g, &data, 16)?
    );
    let path = std::env::temp_dir().join("vsrgan-pretrained.vsrc");
    Checkpoint::from_network(&g, Some(out.steps)).save(&path)?;
    println!("saved {}", path.display());
    Ok(())
}
