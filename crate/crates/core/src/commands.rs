//! Command-line interface. The `vsrgan` binary only forwards to [`main_with_args`].

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checkpoint::Checkpoint;
use crate::config::{resolve_data_path, RunConfigFile};
use crate::data::{dataset_from_frame_dir, imresize_bicubic, image_io, synth_dataset, Dataset, SynthParams};
use crate::error::{Error, Result};
use crate::evaluate::evaluate;
use crate::grad_suite;
use crate::kernels;
use crate::models::{Discriminator, FeatureNet, Generator, Network, NetworkKind};
use crate::plot::loss_curves_svg;
use crate::tensor::Tensor;
use crate::training::{pretrain, train_gan, transfer_init, CheckpointPlan, RunOptions, TrainLog};

#[derive(Debug, Parser)]
#[command(name = "vsrgan", version, about = "Multi-frame video super-resolution with adversarial training")]
pub struct Cli {
    /// Serialize every reduction and zero wall-clock fields so outputs are byte-reproducible.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a packed LR/HR patch dataset from synthetic video or a frame directory.
    SynthData(SynthArgs),
    /// Pixel-loss (MSE) pretraining of the generator.
    Pretrain(TrainArgs),
    /// Adversarial training with pixel, feature and adversarial terms.
    TrainGan(GanArgs),
    /// Super-resolve the center of five frames.
    Infer(InferArgs),
    /// PSNR / SSIM / feature distance over a dataset.
    Eval(EvalArgs),
    /// Finite-difference checks of every backward pass.
    Gradcheck(GradcheckArgs),
    /// Render training-loss curves to SVG.
    Plot(PlotArgs),
    /// Describe a checkpoint file.
    Inspect(InspectArgs),
    /// Write a freshly initialized network checkpoint.
    InitModel(InitArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of video frames to synthesize.
    #[arg(long, default_value_t = 16)]
    pub frames: usize,
    /// Frame height and width in pixels.
    #[arg(long, default_value_t = 72)]
    pub size: usize,
    /// Velocity in pixels per frame, as `dx,dy`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.5, 0.25], allow_negative_numbers = true)]
    pub motion: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    pub scale: usize,
    #[arg(long, default_value_t = 36)]
    pub patch: usize,
    #[arg(long, default_value_t = 36)]
    pub stride: usize,
    /// Frames per training sequence.
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    /// Highest texture frequency in cycles per pixel.
    #[arg(long, default_value_t = crate::data::SyntheticScene::DEFAULT_MAX_FREQUENCY)]
    pub max_frequency: f64,
    /// Use PGM/PPM frames from this directory instead of synthetic video.
    #[arg(long)]
    pub input_dir: Option<PathBuf>,
    /// Output `.vsrd` file; the manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training dataset; falls back to `data.train` of the config.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Generator checkpoint to start from.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Initialize from a generator trained at another scale.
    #[arg(long, conflicts_with = "init")]
    pub transfer_from: Option<PathBuf>,
    /// Continue from the optimizer state stored in `--init`.
    #[arg(long, requires = "init")]
    pub resume: bool,
    /// Final generator checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log CSV (default: next to `--out`).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GanArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Discriminator checkpoint to start from.
    #[arg(long)]
    pub disc_init: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory holding the input frames (sorted by name).
    #[arg(long)]
    pub frames: PathBuf,
    /// Bicubic upscaling applied to the frames before the network.
    #[arg(long, default_value_t = 1)]
    pub upscale: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub bits: u8,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Border pixels excluded from the metrics (default: the dataset scale).
    #[arg(long)]
    pub crop: Option<usize>,
    /// Replace every input sequence with copies of its center frame.
    #[arg(long)]
    pub center_frame_only: bool,
    /// Feature-network weight file; the seeded default is used otherwise.
    #[arg(long)]
    pub feature_weights: Option<PathBuf>,
    /// Report (TOML).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-sample rows (CSV).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// `all` or a layer name such as `conv2d`.
    #[arg(long, default_value = "all")]
    pub which: String,
    /// Inject an error into the named row's analytic gradient.
    #[arg(long, hide = true)]
    pub corrupt: Option<String>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Training logs to overlay.
    #[arg(long = "log", required = true)]
    pub logs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "training losses")]
    pub title: String,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitMode {
    /// Seeded He initialization.
    He,
    /// Every parameter zero.
    Zero,
    /// Generator copying the center frame (bicubic baseline).
    Passthrough,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Generator,
    Discriminator,
    Featurenet,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long, value_enum, default_value = "generator")]
    pub kind: KindArg,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "he")]
    pub mode: InitMode,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<RunConfigFile> {
    match path {
        Some(p) => RunConfigFile::load(p),
        None => Ok(RunConfigFile::default()),
    }
}

fn dataset_path(flag: Option<&Path>, fallback: Option<&Path>) -> Result<PathBuf> {
    let p = flag
        .or(fallback)
        .ok_or_else(|| Error::config("no dataset given: pass --data or set data.train in the config"))?;
    Ok(resolve_data_path(p))
}

fn log_path(args: &TrainArgs) -> PathBuf {
    args.log.clone().unwrap_or_else(|| args.out.with_extension("csv"))
}

/// Generator to train: from `--init`, from `--transfer-from`, or fresh.
/// Returns it with the optimizer step to resume from.
fn initial_generator(args: &TrainArgs, cfg: &RunConfigFile) -> Result<(Generator, u64)> {
    if let Some(src) = &args.transfer_from {
        let mut g = Generator::new(cfg.generator.clone(), cfg.seed)?;
        transfer_init(src, &mut g)?;
        println!("transferred weights from {}", src.display());
        return Ok((g, 0));
    }
    if let Some(init) = &args.init {
        let ck = Checkpoint::load(init)?;
        let g = ck.to_generator()?;
        let step = if args.resume { ck.optimizer_step().unwrap_or(0) } else { 0 };
        return Ok((g, step));
    }
    Ok((Generator::new(cfg.generator.clone(), cfg.seed)?, 0))
}

fn cmd_synth_data(a: &SynthArgs) -> Result<()> {
    let out = resolve_data_path(&a.out);
    let data = match &a.input_dir {
        Some(dir) => dataset_from_frame_dir(dir, a.scale, a.patch, a.stride, a.window)?,
        None => synth_dataset(&SynthParams {
            seed: a.seed,
            video_frames: a.frames,
            size: a.size,
            motion: (a.motion[0], a.motion[1]),
            max_frequency: a.max_frequency,
            scale: a.scale,
            patch: a.patch,
            stride: a.stride,
            window: a.window,
        })?,
    };
    let manifest = data.save(&out)?;
    println!("{} samples written to {} (manifest {})", data.len(), out.display(), manifest.display());
    Ok(())
}

fn finish_training(args: &TrainArgs, log: &TrainLog, steps: u64) -> Result<()> {
    let lp = log_path(args);
    log.save(&lp)?;
    let last = log.last().map_or(String::from("no steps taken"), |r| format!("final loss_g {:.6e}", r.loss_g));
    println!("{steps} steps, {last}; checkpoint {} log {}", args.out.display(), lp.display());
    Ok(())
}

fn cmd_pretrain(a: &TrainArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let data = Dataset::load(dataset_path(a.data.as_deref(), cfg.data.train.as_deref())?)?;
    let (mut g, start_step) = initial_generator(a, &cfg)?;
    let opts = RunOptions {
        checkpoints: Some(CheckpointPlan::new(&a.out, cfg.training.checkpoint_every)),
        start_step,
    };
    let outcome = pretrain(&mut g, &data, &cfg.training, &opts)?;
    finish_training(a, &outcome.log, outcome.steps)
}

fn cmd_train_gan(a: &GanArgs) -> Result<()> {
    let t = &a.train;
    let cfg = load_config(t.config.as_deref())?;
    cfg.training.loss_weights.validate_strict()?;
    let data = Dataset::load(dataset_path(t.data.as_deref(), cfg.data.train.as_deref())?)?;
    if t.init.is_none() && t.transfer_from.is_none() {
        log::warn!("adversarial training from a randomly initialized generator; pretrain first for a reasonable starting point");
        eprintln!("warning: generator is not pretrained");
    }
    let (mut g, start_step) = initial_generator(t, &cfg)?;
    let mut d = match &a.disc_init {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            let mut d = ck.to_discriminator()?;
            if !t.resume {
                d.params_mut().into_iter().for_each(|p| p.reset_moments());
            }
            d
        }
        None => Discriminator::new(cfg.discriminator.clone(), cfg.seed.wrapping_add(1))?,
    };
    let mut f = FeatureNet::new(cfg.feature_net.clone())?;
    let opts = RunOptions {
        checkpoints: Some(CheckpointPlan::new(&t.out, cfg.training.checkpoint_every)),
        start_step,
    };
    let outcome = train_gan(&mut g, &mut d, &mut f, &data, &cfg.training, &opts)?;
    if let Some(step) = outcome.log.collapse_step {
        eprintln!("warning: discriminator collapse detected at step {step}");
    }
    finish_training(t, &outcome.log, outcome.steps)
}

fn cmd_infer(a: &InferArgs) -> Result<()> {
    let g = Checkpoint::load(&a.checkpoint)?.to_generator()?;
    let expected = g.config().input_frames;
    let paths = image_io::list_frames(&a.frames)?;
    if paths.len() != expected {
        return Err(Error::config(format!(
            "expected exactly {expected} frames in {}, found {}",
            a.frames.display(),
            paths.len()
        )));
    }
    if a.upscale == 0 {
        return Err(Error::config("--upscale must be at least 1"));
    }
    let mut frames = Vec::with_capacity(expected);
    for p in &paths {
        let mut f = image_io::read_luminance(p)?;
        if a.upscale > 1 {
            let (h, w) = (f.shape()[1], f.shape()[2]);
            f = imresize_bicubic(&f, h * a.upscale, w * a.upscale, true)?;
        }
        if let Some(first) = frames.first() {
            let first: &Tensor = first;
            if first.shape() != f.shape() {
                return Err(Error::config(format!(
                    "frame {} has size {:?}, expected {:?}",
                    p.display(),
                    f.shape(),
                    first.shape()
                )));
            }
        }
        frames.push(f);
    }
    let (h, w) = (frames[0].shape()[1], frames[0].shape()[2]);
    let refs: Vec<&Tensor> = frames.iter().collect();
    let y = Tensor::stack(&refs)?.reshape(&[1, expected, 1, h, w])?;
    let out = g.infer(&y)?.reshape(&[1, h, w])?.map(|v| v.clamp(0.0, 1.0));
    image_io::write_pnm(&a.out, &out, a.bits)?;
    println!("wrote {}x{} image to {}", w, h, a.out.display());
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let g = Checkpoint::load(&a.checkpoint)?.to_generator()?;
    let data = Dataset::load(dataset_path(a.data.as_deref(), None)?)?;
    if data.is_empty() {
        return Err(Error::config("evaluation dataset is empty"));
    }
    let mut f = FeatureNet::new(Default::default())?;
    if let Some(p) = &a.feature_weights {
        f.load_checkpoint(&Checkpoint::load(p)?)?;
    }
    let crop = a.crop.unwrap_or(data.scale);
    let model = a.checkpoint.display().to_string();
    let report = evaluate(&g, &data, &f, crop, a.center_frame_only, &model)?;
    println!("{}", report.summary());
    if let Some(p) = &a.out {
        fs::write(p, report.to_toml())?;
    }
    if let Some(p) = &a.csv {
        fs::write(p, report.to_csv())?;
    }
    Ok(())
}

fn cmd_gradcheck(a: &GradcheckArgs) -> Result<()> {
    let results = grad_suite::run(&a.which, a.corrupt.as_deref())?;
    print!("{}", grad_suite::format_table(&results));
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Error::Numeric(format!("{failed} of {} gradient checks failed", results.len())));
    }
    println!("all {} gradient checks passed", results.len());
    Ok(())
}

fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let logs = a
        .logs
        .iter()
        .map(|p| {
            let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            Ok((name, TrainLog::load(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    fs::write(&a.out, loss_curves_svg(&a.title, &logs))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_inspect(a: &InspectArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    println!("kind: {}", ck.kind.name());
    match ck.optimizer_step() {
        Some(s) => println!("optimizer state: step {s}"),
        None => println!("optimizer state: none"),
    }
    println!("config:\n{}", ck.config.trim_end());
    let total: usize = ck.tensors.iter().map(|(_, t)| t.numel()).sum();
    println!("tensors ({}, {total} values):", ck.tensors.len());
    for (name, t) in &ck.tensors {
        println!("  {name} {:?}", t.shape());
    }
    Ok(())
}

fn cmd_init_model(a: &InitArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let zero = |net: &mut dyn Network| net.params_mut().into_iter().for_each(|p| p.value.fill(0.0));
    let ck = match a.kind {
        KindArg::Generator => {
            let mut g = match a.mode {
                InitMode::Passthrough => Generator::passthrough(cfg.generator.clone())?,
                _ => Generator::new(cfg.generator.clone(), seed)?,
            };
            if a.mode == InitMode::Zero {
                zero(&mut g);
            }
            Checkpoint::from_network(&g, None)
        }
        KindArg::Discriminator => {
            let mut d = Discriminator::new(cfg.discriminator.clone(), seed)?;
            match a.mode {
                InitMode::Zero => zero(&mut d),
                InitMode::Passthrough => return Err(Error::config("passthrough applies to generators only")),
                InitMode::He => {}
            }
            Checkpoint::from_network(&d, None)
        }
        KindArg::Featurenet => {
            if a.mode == InitMode::Passthrough {
                return Err(Error::config("passthrough applies to generators only"));
            }
            let mut spec = cfg.feature_net.clone();
            if a.seed.is_some() {
                spec.weights = crate::models::WeightSource::Seeded { seed };
            }
            let mut f = FeatureNet::new(spec)?;
            if a.mode == InitMode::Zero {
                zero(&mut f);
            }
            Checkpoint::from_network(&f, None)
        }
    };
    debug_assert!(ck.kind != NetworkKind::Generator || a.kind == KindArg::Generator);
    ck.save(&a.out)?;
    println!("wrote {} checkpoint to {}", ck.kind.name(), a.out.display());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    kernels::set_deterministic(cli.deterministic);
    match &cli.command {
        Command::SynthData(a) => cmd_synth_data(a),
        Command::Pretrain(a) => cmd_pretrain(a),
        Command::TrainGan(a) => cmd_train_gan(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::InitModel(a) => cmd_init_model(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
