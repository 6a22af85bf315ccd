//! Adversarial fine-tuning with the Charbonnier distance and with plain l2,
//! from the same pretrained generator. Both loss curves go to CSV and SVG.

use vsrgan::data::{synth_dataset, SynthParams};
use vsrgan::losses::DistanceKind;
use vsrgan::plot::loss_curves_svg;
use vsrgan::training::{dataset_psnr, pretrain, train_gan, RunOptions, TrainConfig};
use vsrgan::{Discriminator, DiscriminatorConfig, FeatureNet, FeatureNetSpec, Generator, GeneratorConfig};

fn main() -> vsrgan::Result<()> {
    let gan_epochs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50);
    let data = synth_dataset(&SynthParams::default())?;
    let base = TrainConfig { batch_size: 12, pretrain_epochs: 40, lr_drop_epochs: vec![30], gan_epochs, ..Default::default() };
    let mut g0 = Generator::new(GeneratorConfig { base_channels: 16, num_res_blocks: 3, ..Default::default() }, 7)?;
    pretrain(&mut g0, &data, &base, &RunOptions::default())?;
    println!("pretrained: {:.2} dB", dataset_psnr(&g0, &data, 16)?);

    let out = std::env::temp_dir().join("vsrgan-gan");
    std::fs::create_dir_all(&out)?;
    let mut logs = Vec::new();
    for (name, kind) in [("charbonnier", DistanceKind::Charbonnier), ("l2", DistanceKind::L2)] {
        let cfg = TrainConfig { charbonnier_mode: kind, ..base.clone() };
        let mut g = g0.clone();
        let mut d = Discriminator::new(DiscriminatorConfig::default(), 11)?;
        let mut f = FeatureNet::new(FeatureNetSpec::default())?;
        let run = train_gan(&mut g, &mut d, &mut f, &data, &cfg, &RunOptions::default())?;
        let last = run.log.last().expect("at least one step");
        println!(
            "{name:<11} {} steps  final L_D {:.4}  L_G {:.4}  collapse {:?}  PSNR {:.2} dB",
            run.steps,
            last.loss_d,
            last.loss_g,
            run.log.collapse_step,
            dataset_psnr(&g, &data, 16)?
        );
        run.log.save(out.join(format!("{name}.csv")))?;
        logs.push((name.to_string(), run.log));
    }
    std::fs::write(out.join("losses.svg"), loss_curves_svg("Charbonnier vs l2", &logs))?;
    println!("curves in {}", out.display());
    Ok(())
}
