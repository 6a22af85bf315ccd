//! Pixel-loss pretraining and alternating adversarial training.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{self, BnMode};
use crate::losses::{gan_losses, mse_loss, total_loss, Reduction};
use crate::models::{Discriminator, FeatureNet, Generator, Network};
use crate::training::adam::{adam_step, AdamSettings};
use crate::training::config::TrainConfig;
use crate::training::log::{TrainLog, TrainRecord};

/// Consecutive steps with `L_D` below [`COLLAPSE_THRESHOLD`] that trigger the
/// collapse warning.
pub const COLLAPSE_WINDOW: usize = 100;
pub const COLLAPSE_THRESHOLD: f64 = 1e-3;

/// Where checkpoints go. Periodic files are named after `out` with an
/// `_epochNNNN` suffix; the discriminator of an adversarial run is written
/// next to the generator with a `_disc` suffix.
#[derive(Clone, Debug)]
pub struct CheckpointPlan {
    pub out: PathBuf,
    pub every: usize,
}

impl CheckpointPlan {
    pub fn new(out: impl Into<PathBuf>, every: usize) -> Self {
        CheckpointPlan { out: out.into(), every }
    }

    fn with_suffix(&self, suffix: &str) -> PathBuf {
        let stem = self.out.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
        let ext = self.out.extension().and_then(|s| s.to_str()).unwrap_or("vsrc");
        self.out.with_file_name(format!("{stem}{suffix}.{ext}"))
    }

    pub fn periodic(&self, epoch: usize) -> PathBuf {
        self.with_suffix(&format!("_epoch{epoch:04}"))
    }

    pub fn discriminator_path(&self, generator_path: &Path) -> PathBuf {
        let stem = generator_path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
        let ext = generator_path.extension().and_then(|s| s.to_str()).unwrap_or("vsrc");
        generator_path.with_file_name(format!("{stem}_disc.{ext}"))
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub checkpoints: Option<CheckpointPlan>,
    /// Generator steps already taken; a resumed run continues from the epoch
    /// boundary this count corresponds to and keeps the optimizer state.
    pub start_step: u64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: TrainLog,
    /// Generator steps taken in total, including those before a resume.
    pub steps: u64,
    pub checkpoints: Vec<PathBuf>,
}

/// Number of minibatches per epoch.
pub fn steps_per_epoch(samples: usize, batch_size: usize) -> usize {
    samples.div_ceil(batch_size)
}

/// Shuffled minibatches for one epoch, a pure function of `(seed, epoch)`.
/// The last batch may be smaller.
pub fn epoch_batches(seed: u64, epoch: usize, samples: usize, batch_size: usize) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..samples).collect();
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

fn elapsed(start: &Instant) -> f64 {
    if kernels::is_deterministic() {
        0.0
    } else {
        start.elapsed().as_secs_f64()
    }
}

fn apply_adam<N: Network + ?Sized>(net: &mut N, s: &AdamSettings, t: u64) -> Result<()> {
    for p in net.params_mut() {
        adam_step(p, s, t)?;
    }
    Ok(())
}

fn start_epoch(opts: &RunOptions, per_epoch: usize) -> Result<usize> {
    if opts.start_step % per_epoch as u64 != 0 {
        return Err(Error::config(format!(
            "resume step {} is not at an epoch boundary ({per_epoch} steps per epoch)",
            opts.start_step
        )));
    }
    Ok((opts.start_step / per_epoch as u64) as usize)
}

fn check_dataset(data: &Dataset, config: &TrainConfig) -> Result<()> {
    if data.is_empty() {
        return Err(Error::config("training dataset is empty"));
    }
    if data.scale != config.scale {
        return Err(Error::config(format!(
            "dataset scale {} does not match config scale {}",
            data.scale, config.scale
        )));
    }
    Ok(())
}

fn numeric_abort(what: &str, step: u64, last_good: Option<&PathBuf>) -> Error {
    let kept = match last_good {
        Some(p) => format!("last good checkpoint: {}", p.display()),
        None => "no checkpoint was written before the failure".to_string(),
    };
    Error::Numeric(format!("non-finite {what} at step {step}; {kept}"))
}

/// Minimizes the mean squared error of the generator on `data`, with ADAM and
/// the stepped learning-rate schedule of `config`.
pub fn pretrain(generator: &mut Generator, data: &Dataset, config: &TrainConfig, opts: &RunOptions) -> Result<TrainOutcome> {
    config.validate()?;
    check_dataset(data, config)?;
    let per_epoch = steps_per_epoch(data.len(), config.batch_size);
    let first_epoch = start_epoch(opts, per_epoch)?;
    if opts.start_step == 0 {
        generator.params_mut().into_iter().for_each(|p| p.reset_moments());
    }
    let clock = Instant::now();
    let mut log = TrainLog::default();
    let mut written = Vec::new();
    let mut step = opts.start_step;
    for epoch in first_epoch..config.pretrain_epochs {
        let adam = config.pretrain_adam(epoch);
        for batch in epoch_batches(config.seed, epoch, data.len(), config.batch_size) {
            step += 1;
            let (frames, x) = data.batch(&batch)?;
            generator.zero_grads();
            let xhat = generator.forward(&frames)?;
            let (loss, grad) = mse_loss(&x, &xhat, Reduction::Mean)?;
            if !loss.is_finite() {
                return Err(numeric_abort("pretraining loss", step, written.last()));
            }
            generator.backward(&grad)?;
            apply_adam(generator, &adam, step)?;
            log.push(TrainRecord {
                epoch,
                step,
                loss_d: 0.0,
                loss_g: loss,
                loss_pixel: loss,
                loss_feat: 0.0,
                lr: adam.lr,
                seconds: elapsed(&clock),
            });
        }
        generator.clear_cache();
        log::info!("pretrain epoch {epoch}: loss {:.6e}", log.last().map_or(f64::NAN, |r| r.loss_g));
        if let Some(plan) = &opts.checkpoints {
            if plan.every > 0 && (epoch + 1) % plan.every == 0 {
                let path = plan.periodic(epoch + 1);
                Checkpoint::from_network(generator, Some(step)).save(&path)?;
                written.push(path);
            }
        }
    }
    if let Some(plan) = &opts.checkpoints {
        Checkpoint::from_network(generator, Some(step)).save(&plan.out)?;
        written.push(plan.out.clone());
    }
    Ok(TrainOutcome {
        log,
        steps: step,
        checkpoints: written,
    })
}

/// One discriminator update on real patches `x` against detached generator
/// outputs `fake`. Returns `L_D`.
pub fn discriminator_step(
    discriminator: &mut Discriminator,
    x: &crate::tensor::Tensor,
    fake: &crate::tensor::Tensor,
    config: &TrainConfig,
    t: u64,
) -> Result<f64> {
    let mode = config.gan_mode;
    discriminator.zero_grads();
    let d_real = discriminator.forward(x, BnMode::Train)?;
    let g_real = gan_losses(&d_real, &d_real, mode)?.grad_d_real;
    discriminator.backward(&g_real)?;
    let d_fake = discriminator.forward(fake, BnMode::Train)?;
    let g_fake = gan_losses(&d_fake, &d_fake, mode)?.grad_d_fake;
    discriminator.backward(&g_fake)?;
    let loss_d = gan_losses(&d_real, &d_fake, mode)?.loss_d;
    if loss_d.is_finite() {
        apply_adam(discriminator, &config.discriminator_adam(), t)?;
    }
    Ok(loss_d)
}

/// Alternating adversarial training: `d_steps_per_g_step` discriminator
/// updates on each minibatch, then one generator update on the combined
/// objective. Both networks have their own ADAM state and weight decay.
pub fn train_gan(
    generator: &mut Generator,
    discriminator: &mut Discriminator,
    feature_net: &mut FeatureNet,
    data: &Dataset,
    config: &TrainConfig,
    opts: &RunOptions,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_dataset(data, config)?;
    if data.patch != discriminator.config().input_size {
        return Err(Error::config(format!(
            "dataset patch {} does not match discriminator input_size {}",
            data.patch,
            discriminator.config().input_size
        )));
    }
    let per_epoch = steps_per_epoch(data.len(), config.batch_size);
    let first_epoch = start_epoch(opts, per_epoch)?;
    if opts.start_step == 0 {
        generator.params_mut().into_iter().for_each(|p| p.reset_moments());
        discriminator.params_mut().into_iter().for_each(|p| p.reset_moments());
    }
    let k = config.d_steps_per_g_step as u64;
    let g_adam = config.generator_gan_adam();
    let weights = &config.loss_weights;
    let clock = Instant::now();
    let mut log = TrainLog::default();
    let mut written = Vec::new();
    let mut step = opts.start_step;
    let mut low_streak = 0usize;
    for epoch in first_epoch..config.gan_epochs {
        for batch in epoch_batches(config.seed, epoch, data.len(), config.batch_size) {
            step += 1;
            let (frames, x) = data.batch(&batch)?;
            let fake = generator.infer(&frames)?;
            let mut loss_d = 0.0;
            for j in 0..k {
                loss_d = discriminator_step(discriminator, &x, &fake, config, (step - 1) * k + j + 1)?;
                if !loss_d.is_finite() {
                    return Err(numeric_abort("discriminator loss", step, written.last()));
                }
            }
            generator.zero_grads();
            let xhat = generator.forward(&frames)?;
            let tl = total_loss(&x, &xhat, discriminator, feature_net, weights, config.objective())?;
            if !tl.total.is_finite() {
                return Err(numeric_abort("generator loss", step, written.last()));
            }
            generator.backward(&tl.grad)?;
            apply_adam(generator, &g_adam, step)?;
            discriminator.zero_grads();
            low_streak = if loss_d < COLLAPSE_THRESHOLD { low_streak + 1 } else { 0 };
            if low_streak >= COLLAPSE_WINDOW && log.collapse_step.is_none() {
                log::warn!("discriminator collapse: L_D < {COLLAPSE_THRESHOLD} for {COLLAPSE_WINDOW} steps (step {step})");
                log.collapse_step = Some(step);
            }
            log.push(TrainRecord {
                epoch,
                step,
                loss_d,
                loss_g: tl.total,
                loss_pixel: tl.pixel,
                loss_feat: tl.feature,
                lr: config.gan_lr,
                seconds: elapsed(&clock),
            });
        }
        generator.clear_cache();
        log::info!(
            "gan epoch {epoch}: L_D {:.4} L_G {:.4}",
            log.last().map_or(f64::NAN, |r| r.loss_d),
            log.last().map_or(f64::NAN, |r| r.loss_g)
        );
        if let Some(plan) = &opts.checkpoints {
            if plan.every > 0 && (epoch + 1) % plan.every == 0 {
                let path = plan.periodic(epoch + 1);
                Checkpoint::from_network(generator, Some(step)).save(&path)?;
                Checkpoint::from_network(discriminator, Some(step * k)).save(plan.discriminator_path(&path))?;
                written.push(path);
            }
        }
    }
    if let Some(plan) = &opts.checkpoints {
        Checkpoint::from_network(generator, Some(step)).save(&plan.out)?;
        Checkpoint::from_network(discriminator, Some(step * k)).save(plan.discriminator_path(&plan.out))?;
        written.push(plan.out.clone());
    }
    Ok(TrainOutcome {
        log,
        steps: step,
        checkpoints: written,
    })
}

/// Copies every tensor of a stored generator into `generator` and clears its
/// optimizer moments. Both must share one architecture; the pre-upsampled
/// pipeline makes it independent of the scale factor.
pub fn transfer_init(source: impl AsRef<Path>, generator: &mut Generator) -> Result<()> {
    let ckpt = Checkpoint::load(source)?;
    transfer_from_checkpoint(&ckpt, generator)
}

pub fn transfer_from_checkpoint(ckpt: &Checkpoint, generator: &mut Generator) -> Result<()> {
    if ckpt.kind != generator.kind() {
        return Err(Error::Checkpoint(format!(
            "transfer source is a {}, not a generator",
            ckpt.kind.name()
        )));
    }
    generator.load_named_tensors(&ckpt.tensors)?;
    let source = ckpt.generator_config()?;
    if !source.same_architecture(generator.config()) {
        return Err(Error::Checkpoint(format!(
            "transfer source architecture {source:?} differs from target {:?}",
            generator.config()
        )));
    }
    generator.params_mut().into_iter().for_each(|p| p.reset_moments());
    Ok(())
}

/// Mean squared error of the generator over the whole dataset.
pub fn dataset_mse(generator: &Generator, data: &Dataset, batch_size: usize) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::config("dataset is empty"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let (frames, x) = data.batch(chunk)?;
        let xhat = generator.infer(&frames)?;
        let (l, _) = mse_loss(&x, &xhat, Reduction::Sum)?;
        sum += l;
        count += x.numel();
    }
    Ok(sum / count as f64)
}

/// PSNR (peak 1) corresponding to [`dataset_mse`].
pub fn dataset_psnr(generator: &Generator, data: &Dataset, batch_size: usize) -> Result<f64> {
    let mse = dataset_mse(generator, data, batch_size)?;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}
