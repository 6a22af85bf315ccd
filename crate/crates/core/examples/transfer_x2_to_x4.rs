//! Start a x4 model from weights trained at x2 and compare its first epochs
//! with a model trained from scratch.

use vsrgan::data::{synth_dataset, SynthParams};
use vsrgan::training::{dataset_psnr, pretrain, transfer_from_checkpoint, RunOptions, TrainConfig};
use vsrgan::{Checkpoint, Generator, GeneratorConfig};

fn main() -> vsrgan::Result<()> {
    let gcfg = GeneratorConfig { base_channels: 16, num_res_blocks: 3, ..Default::default() };
    let x2 = synth_dataset(&SynthParams::default())?;
    let x4 = synth_dataset(&SynthParams { scale: 4, seed: 3, ..Default::default() })?;

    let mut source = Generator::new(gcfg.clone(), 7)?;
    let cfg2 = TrainConfig { batch_size: 12, pretrain_epochs: 40, lr_drop_epochs: vec![30], ..Default::default() };
    pretrain(&mut source, &x2, &cfg2, &RunOptions::default())?;
    println!("x2 source: {:.2} dB on its own data", dataset_psnr(&source, &x2, 16)?);

    let mut moved = Generator::new(gcfg.clone(), 8)?;
    transfer_from_checkpoint(&Checkpoint::from_network(&source, None), &mut moved)?;
    let mut fresh = Generator::new(gcfg, 8)?;

    let cfg4 = TrainConfig { scale: 4, batch_size: 12, pretrain_epochs: 10, lr_drop_epochs: vec![], ..Default::default() };
    println!("epochs  transferred (dB)  scratch (dB)");
    println!("{:>6}  {:>16.2}  {:>12.2}", 0, dataset_psnr(&moved, &x4, 16)?, dataset_psnr(&fresh, &x4, 16)?);
    pretrain(&mut moved, &x4, &cfg4, &RunOptions::default())?;
    pretrain(&mut fresh, &x4, &cfg4, &RunOptions::default())?;
    println!("{:>6}  {:>16.2}  {:>12.2}", 10, dataset_psnr(&moved, &x4, 16)?, dataset_psnr(&fresh, &x4, 16)?);
    Ok(())
}
