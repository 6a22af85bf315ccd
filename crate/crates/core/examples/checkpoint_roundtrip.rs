//! Save a generator with optimizer state, reload it, and show that a flipped
//! byte is caught.

use vsrgan::data::synth_dataset;
use vsrgan::data::SynthParams;
use vsrgan::training::{pretrain, RunOptions, TrainConfig};
use vsrgan::{Checkpoint, Generator, GeneratorConfig};

fn main() -> vsrgan::Result<()> {
    let data = synth_dataset(&SynthParams { video_frames: 5, ..Default::default() })?;
    let mut g = Generator::new(GeneratorConfig { base_channels: 8, num_res_blocks: 2, ..Default::default() }, 1)?;
    let cfg = TrainConfig { batch_size: 2, pretrain_epochs: 3, lr_drop_epochs: vec![], ..Default::default() };
    let out = pretrain(&mut g, &data, &cfg, &RunOptions::default())?;

    let dir = std::env::temp_dir().join("vsrgan-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("generator.vsrc");
    let ck = Checkpoint::from_network(&g, Some(out.steps));
    ck.save(&path)?;
    let bytes = std::fs::read(&path)?;
    let back = Checkpoint::load(&path)?;
    println!("{} bytes, {} tensors, optimizer step {:?}", bytes.len(), back.tensors.len(), back.optimizer_step());
    println!("re-encoded identically: {}", back.to_bytes() == bytes);

    let (frames, _) = data.batch(&[0, 1])?;
    let restored = back.to_generator()?;
    println!("same outputs after reload: {}", g.infer(&frames)? == restored.infer(&frames)?);

    let mut corrupt = bytes.clone();
    corrupt[bytes.len() / 2] ^= 0x10;
    match Checkpoint::from_bytes(&corrupt) {
        Ok(_) => println!("corruption went unnoticed"),
        Err(e) => println!("flipped byte rejected: {e}"),
    }
    Ok(())
}
