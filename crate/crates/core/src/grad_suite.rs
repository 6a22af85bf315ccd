//! Registry of finite-difference checks for every differentiable layer, loss
//! and full network, at small fixed shapes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gradcheck::{gradient_check_at, sample_coords};
use crate::kernels::{self, BnMode, RunningStats};
use crate::losses::{self, DistanceKind, GanMode, Reduction};
use crate::models::{Discriminator, DiscriminatorConfig, FeatureNet, FeatureNetSpec, Generator, GeneratorConfig, Network};
use crate::tensor::Tensor;

/// Tolerance for single layers and losses.
pub const LAYER_TOLERANCE: f64 = 1e-6;
/// Tolerance for whole networks.
pub const COMPOSITE_TOLERANCE: f64 = 1e-4;
pub const STEP: f64 = 1e-5;
/// Coordinates probed per row at most.
const MAX_COORDS: usize = 24;

type Check = Box<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// One check. The closure receives a factor applied to the analytic gradient
/// (1 for a genuine check) and returns the worst relative error.
pub struct GradRow {
    pub layer: &'static str,
    pub name: String,
    pub tolerance: f64,
    check: Check,
}

impl GradRow {
    pub fn new(layer: &'static str, name: &str, tolerance: f64, check: impl Fn(f64) -> Result<f64> + Send + Sync + 'static) -> Self {
        GradRow {
            layer,
            name: name.to_string(),
            tolerance,
            check: Box::new(check),
        }
    }

    pub fn run(&self, analytic_factor: f64) -> GradResult {
        let outcome = (self.check)(analytic_factor);
        let (rel_error, error) = match outcome {
            Ok(e) => (e, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        GradResult {
            layer: self.layer,
            name: self.name.clone(),
            tolerance: self.tolerance,
            rel_error,
            passed: error.is_none() && rel_error < self.tolerance,
            error,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradResult {
    pub layer: &'static str,
    pub name: String,
    pub tolerance: f64,
    pub rel_error: f64,
    pub passed: bool,
    pub error: Option<String>,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random values bounded away from zero so activation kinks are never crossed.
fn away_from_zero(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::uniform(shape, -1.0, 1.0, &mut r).map(|v| v.signum() * (0.05 + v.abs()))
}

fn randn(shape: &[usize], seed: u64) -> Tensor {
    Tensor::randn(shape, 1.0, &mut rng(seed))
}

/// `sum(r * y)` for a fixed random `r`.
fn weighted_sum(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn probe(point: &Tensor, analytic: &Tensor, factor: f64, f: impl FnMut(&Tensor) -> Result<f64>) -> Result<f64> {
    let coords = sample_coords(point.numel(), MAX_COORDS, point.numel() as u64);
    gradient_check_at(f, &analytic.scale(factor), point, STEP, &coords)
}

fn conv_rows(rows: &mut Vec<GradRow>) {
    for (stride, tag) in [(1usize, "conv2d"), (2, "conv2d.stride2")] {
        let x = randn(&[2, 3, 7, 7], 1);
        let w = randn(&[4, 3, 3, 3], 2);
        let b = randn(&[4], 3);
        let out_shape = kernels::conv2d_forward(&x, &w, Some(&b), stride, 1).unwrap().shape().to_vec();
        let r = randn(&out_shape, 4);
        let (gi, gw, gb) = kernels::conv2d_backward(&r, &x, &w, stride, 1).unwrap();
        let loss = {
            let r = r.clone();
            move |x: &Tensor, w: &Tensor, b: &Tensor| Ok(weighted_sum(&kernels::conv2d_forward(x, w, Some(b), stride, 1)?, &r))
        };
        {
            let (w, b, loss) = (w.clone(), b.clone(), loss.clone());
            let x0 = x.clone();
            rows.push(GradRow::new("conv2d", &format!("{tag}.input"), LAYER_TOLERANCE, move |k| {
                probe(&x0, &gi, k, |p| loss(p, &w, &b))
            }));
        }
        {
            let (x, b, loss) = (x.clone(), b.clone(), loss.clone());
            let w0 = w.clone();
            rows.push(GradRow::new("conv2d", &format!("{tag}.weight"), LAYER_TOLERANCE, move |k| {
                probe(&w0, &gw, k, |p| loss(&x, p, &b))
            }));
        }
        if stride == 1 {
            rows.push(GradRow::new("conv2d", &format!("{tag}.bias"), LAYER_TOLERANCE, move |k| {
                probe(&b, &gb, k, |p| loss(&x, &w, p))
            }));
        }
    }
}

fn activation_rows(rows: &mut Vec<GradRow>) {
    for (layer, slope) in [("relu", 0.0), ("leaky_relu", 0.2)] {
        let x = away_from_zero(&[2, 3, 4, 4], 10);
        let r = randn(x.shape(), 11);
        let g = kernels::leaky_relu_backward(&r, &x, slope).unwrap();
        rows.push(GradRow::new(layer, &format!("{layer}.input"), LAYER_TOLERANCE, move |k| {
            probe(&x, &g, k, |p| Ok(weighted_sum(&kernels::leaky_relu_forward(p, slope), &r)))
        }));
    }
    let x = randn(&[3, 2], 12);
    let r = randn(&[3, 2], 13);
    let y = kernels::sigmoid_forward(&x).unwrap();
    let g = kernels::sigmoid_backward(&r, &y).unwrap();
    rows.push(GradRow::new("sigmoid", "sigmoid.input", LAYER_TOLERANCE, move |k| {
        probe(&x, &g, k, |p| Ok(weighted_sum(&kernels::sigmoid_forward(p)?, &r)))
    }));
}

fn batchnorm_rows(rows: &mut Vec<GradRow>) {
    let x = randn(&[3, 2, 3, 3], 20);
    let gamma = randn(&[2], 21);
    let beta = randn(&[2], 22);
    let stats = RunningStats {
        mean: Tensor::new(&[2], vec![0.3, -0.2]).unwrap(),
        var: Tensor::new(&[2], vec![1.5, 0.7]).unwrap(),
    };
    let r = randn(x.shape(), 23);
    for (mode, tag) in [(BnMode::Train, "train"), (BnMode::Eval, "eval")] {
        let (_, _, cache) = kernels::batchnorm_forward(&x, &gamma, &beta, &stats, mode, 0.1, 1e-5).unwrap();
        let (gi, gg, gb) = kernels::batchnorm_backward(&r, &cache, &gamma).unwrap();
        let loss = {
            let (r, stats) = (r.clone(), stats.clone());
            move |x: &Tensor, g: &Tensor, b: &Tensor| {
                Ok(weighted_sum(&kernels::batchnorm_forward(x, g, b, &stats, mode, 0.1, 1e-5)?.0, &r))
            }
        };
        let targets = [("input", x.clone(), gi), ("gamma", gamma.clone(), gg), ("beta", beta.clone(), gb)];
        for (which, point, analytic) in targets {
            let (x, gamma, beta, loss) = (x.clone(), gamma.clone(), beta.clone(), loss.clone());
            rows.push(GradRow::new("batchnorm", &format!("batchnorm.{tag}.{which}"), LAYER_TOLERANCE, move |k| {
                probe(&point, &analytic, k, |p| match which {
                    "input" => loss(p, &gamma, &beta),
                    "gamma" => loss(&x, p, &beta),
                    _ => loss(&x, &gamma, p),
                })
            }));
        }
    }
}

fn dense_rows(rows: &mut Vec<GradRow>) {
    let x = randn(&[3, 2, 2, 2], 30);
    let w = randn(&[4, 8], 31);
    let b = randn(&[4], 32);
    let r = randn(&[3, 4], 33);
    let (gi, gw, gb) = kernels::dense_backward(&r, &x, &w).unwrap();
    let loss = move |x: &Tensor, w: &Tensor, b: &Tensor| Ok(weighted_sum(&kernels::dense_forward(x, w, b)?, &r));
    let targets = [("input", x.clone(), gi), ("weight", w.clone(), gw), ("bias", b.clone(), gb)];
    for (which, point, analytic) in targets {
        let (x, w, b, loss) = (x.clone(), w.clone(), b.clone(), loss.clone());
        rows.push(GradRow::new("dense", &format!("dense.{which}"), LAYER_TOLERANCE, move |k| {
            probe(&point, &analytic, k, |p| match which {
                "input" => loss(p, &w, &b),
                "weight" => loss(&x, p, &b),
                _ => loss(&x, &w, p),
            })
        }));
    }
}

fn structural_rows(rows: &mut Vec<GradRow>) {
    let x = randn(&[2, 2, 5, 6], 40);
    let r = randn(&[2, 2, 2, 3], 41);
    let g = kernels::avg_pool2_backward(&r, x.shape()).unwrap();
    rows.push(GradRow::new("avg_pool2", "avg_pool2.input", LAYER_TOLERANCE, move |k| {
        probe(&x, &g, k, |p| Ok(weighted_sum(&kernels::avg_pool2_forward(p)?, &r)))
    }));

    let a = randn(&[2, 2, 3, 3], 42);
    let b = randn(&[2, 3, 3, 3], 43);
    let r = randn(&[2, 5, 3, 3], 44);
    let ga = kernels::channel_concat_backward(&r, &[2, 3]).unwrap().remove(0);
    rows.push(GradRow::new("channel_concat", "channel_concat.input", LAYER_TOLERANCE, move |k| {
        probe(&a, &ga, k, |p| Ok(weighted_sum(&kernels::channel_concat(&[p, &b])?, &r)))
    }));

    let a = randn(&[2, 3, 3], 45);
    let b = randn(&[2, 3, 3], 46);
    let r = randn(&[2, 3, 3], 47);
    let (ga, _) = kernels::add_backward(&r);
    rows.push(GradRow::new("add", "add.input", LAYER_TOLERANCE, move |k| {
        probe(&a, &ga, k, |p| Ok(weighted_sum(&kernels::add(p, &b)?, &r)))
    }));
}

fn loss_rows(rows: &mut Vec<GradRow>) {
    let x = randn(&[2, 1, 4, 4], 50);
    let xhat = randn(&[2, 1, 4, 4], 51);
    let (_, g) = losses::mse_loss(&x, &xhat, Reduction::Mean).unwrap();
    {
        let (x, xhat) = (x.clone(), xhat.clone());
        rows.push(GradRow::new("mse", "mse.prediction", LAYER_TOLERANCE, move |k| {
            probe(&xhat, &g, k, |p| Ok(losses::mse_loss(&x, p, Reduction::Mean)?.0))
        }));
    }
    let (_, g) = losses::charbonnier(&xhat, &x, losses::CHARBONNIER_EPS).unwrap();
    {
        let (x, xhat) = (x.clone(), xhat.clone());
        rows.push(GradRow::new("charbonnier", "charbonnier.prediction", LAYER_TOLERANCE, move |k| {
            probe(&xhat, &g, k, |p| Ok(losses::charbonnier(p, &x, losses::CHARBONNIER_EPS)?.0))
        }));
    }

    let mut r = rng(52);
    let d_real = Tensor::uniform(&[4, 1], 0.1, 0.9, &mut r);
    let d_fake = Tensor::uniform(&[4, 1], 0.1, 0.9, &mut r);
    let gl = losses::gan_losses(&d_real, &d_fake, GanMode::Minimax).unwrap();
    {
        let (d_fake, d_real, g) = (d_fake.clone(), d_real.clone(), gl.grad_d_real.clone());
        rows.push(GradRow::new("gan_loss", "gan_loss.discriminator.real", LAYER_TOLERANCE, move |k| {
            probe(&d_real, &g, k, |p| Ok(losses::gan_losses(p, &d_fake, GanMode::Minimax)?.loss_d))
        }));
    }
    {
        let (d_fake, d_real, g) = (d_fake.clone(), d_real.clone(), gl.grad_d_fake.clone());
        rows.push(GradRow::new("gan_loss", "gan_loss.discriminator.fake", LAYER_TOLERANCE, move |k| {
            probe(&d_fake, &g, k, |p| Ok(losses::gan_losses(&d_real, p, GanMode::Minimax)?.loss_d))
        }));
    }
    for (mode, tag) in [(GanMode::Minimax, "minimax"), (GanMode::Nonsaturating, "nonsaturating")] {
        let g = losses::gan_losses(&d_real, &d_fake, mode).unwrap().grad_g_fake;
        let (d_fake, d_real) = (d_fake.clone(), d_real.clone());
        rows.push(GradRow::new("gan_loss", &format!("gan_loss.generator.{tag}"), LAYER_TOLERANCE, move |k| {
            probe(&d_fake, &g, k, |p| Ok(losses::gan_losses(&d_real, p, mode)?.loss_g))
        }));
    }

    rows.push(GradRow::new("feature_loss", "feature_loss.prediction", LAYER_TOLERANCE, move |k| {
        let mut net = FeatureNet::new(FeatureNetSpec::default())?;
        let x = Tensor::uniform(&[1, 1, 8, 8], 0.0, 1.0, &mut rng(53));
        let xhat = Tensor::uniform(&[1, 1, 8, 8], 0.0, 1.0, &mut rng(54));
        let eps = losses::CHARBONNIER_EPS;
        let (_, g) = losses::feature_distance_loss(DistanceKind::Charbonnier, &xhat, &x, &mut net, eps)?;
        probe(&xhat, &g, k, |p| Ok(losses::feature_distance_loss(DistanceKind::Charbonnier, p, &x, &mut net, eps)?.0))
    }));
}

fn tiny_generator() -> Result<Generator> {
    let cfg = GeneratorConfig {
        base_channels: 4,
        num_res_blocks: 2,
        patch_size: 8,
        ..Default::default()
    };
    Generator::new(cfg, 60)
}

fn generator_rows(rows: &mut Vec<GradRow>) {
    let frames = || Tensor::uniform(&[1, 5, 1, 8, 8], 0.0, 1.0, &mut rng(61));
    let target = || Tensor::uniform(&[1, 1, 8, 8], 0.0, 1.0, &mut rng(62));
    rows.push(GradRow::new("generator", "generator.input", COMPOSITE_TOLERANCE, move |k| {
        let mut g = tiny_generator()?;
        let (y, x) = (frames(), target());
        let (_, grad) = losses::mse_loss(&x, &g.forward(&y)?, Reduction::Sum)?;
        let gi = g.backward(&grad)?;
        probe(&y, &gi, k, |p| Ok(losses::mse_loss(&x, &g.infer(p)?, Reduction::Sum)?.0))
    }));
    for name in ["frame_conv.weight", "fusion.bias", "res1.conv2.weight", "output.weight"] {
        rows.push(GradRow::new("generator", &format!("generator.{name}"), COMPOSITE_TOLERANCE, move |k| {
            let mut g = tiny_generator()?;
            let (y, x) = (frames(), target());
            g.zero_grads();
            let (_, grad) = losses::mse_loss(&x, &g.forward(&y)?, Reduction::Sum)?;
            g.backward(&grad)?;
            let idx = param_index(&g, name)?;
            let (point, analytic) = {
                let p = &g.params()[idx];
                (p.value.clone(), p.grad.clone())
            };
            probe(&point, &analytic, k, |v| {
                g.params_mut()[idx].value = v.clone();
                Ok(losses::mse_loss(&x, &g.infer(&y)?, Reduction::Sum)?.0)
            })
        }));
    }
}

fn param_index<N: Network>(net: &N, name: &str) -> Result<usize> {
    net.params()
        .iter()
        .position(|p| p.name == name)
        .ok_or_else(|| Error::config(format!("no parameter {name}")))
}

fn tiny_discriminator() -> Result<Discriminator> {
    let cfg = DiscriminatorConfig {
        conv_channels: vec![3, 4, 5],
        input_size: 8,
        ..Default::default()
    };
    Discriminator::new(cfg, 70)
}

/// Binary cross-entropy of the discriminator on a batch labelled real.
fn bce_real(d: &mut Discriminator, x: &Tensor) -> Result<f64> {
    let p = d.forward(x, BnMode::Train)?;
    let floor = losses::PROB_FLOOR;
    Ok(-p.data().iter().map(|v| v.clamp(floor, 1.0 - floor).ln()).sum::<f64>() / p.numel() as f64)
}

fn discriminator_rows(rows: &mut Vec<GradRow>) {
    let patch = || Tensor::uniform(&[3, 1, 8, 8], 0.0, 1.0, &mut rng(71));
    rows.push(GradRow::new("discriminator", "discriminator.input", COMPOSITE_TOLERANCE, move |k| {
        let mut d = tiny_discriminator()?;
        let x = patch();
        let p = d.forward(&x, BnMode::Train)?;
        let g = losses::gan_losses(&p, &p, GanMode::Minimax)?.grad_d_real;
        let gi = d.backward(&g)?;
        probe(&x, &gi, k, |v| bce_real(&mut d, v))
    }));
    for name in ["conv0.weight", "bn1.gamma", "bn2.beta", "fc.weight", "fc.bias"] {
        rows.push(GradRow::new("discriminator", &format!("discriminator.{name}"), COMPOSITE_TOLERANCE, move |k| {
            let mut d = tiny_discriminator()?;
            let x = patch();
            d.zero_grads();
            let p = d.forward(&x, BnMode::Train)?;
            let g = losses::gan_losses(&p, &p, GanMode::Minimax)?.grad_d_real;
            d.backward(&g)?;
            let idx = param_index(&d, name)?;
            let (point, analytic) = {
                let p = &d.params()[idx];
                (p.value.clone(), p.grad.clone())
            };
            probe(&point, &analytic, k, |v| {
                d.params_mut()[idx].value = v.clone();
                bce_real(&mut d, &x)
            })
        }));
    }
}

/// Every registered check, in display order.
pub fn registry() -> Vec<GradRow> {
    let mut rows = Vec::new();
    conv_rows(&mut rows);
    activation_rows(&mut rows);
    batchnorm_rows(&mut rows);
    dense_rows(&mut rows);
    structural_rows(&mut rows);
    loss_rows(&mut rows);
    generator_rows(&mut rows);
    discriminator_rows(&mut rows);
    rows
}

/// Distinct layer names accepted by [`run`].
pub fn layer_names() -> Vec<&'static str> {
    let mut names: Vec<&'static str> = Vec::new();
    for r in registry() {
        if !names.contains(&r.layer) {
            names.push(r.layer);
        }
    }
    names
}

/// Runs the rows of layer `which` (or `"all"`). The row named `corrupt`, if
/// any, is run with a 1% error injected into its analytic gradient.
pub fn run(which: &str, corrupt: Option<&str>) -> Result<Vec<GradResult>> {
    let rows: Vec<GradRow> = registry()
        .into_iter()
        .filter(|r| which == "all" || r.layer == which)
        .collect();
    if rows.is_empty() {
        return Err(Error::config(format!(
            "unknown layer {which:?}; expected all or one of {}",
            layer_names().join(", ")
        )));
    }
    if let Some(c) = corrupt {
        if !rows.iter().any(|r| r.name == c) {
            return Err(Error::config(format!("no gradient-check row named {c:?}")));
        }
    }
    Ok(rows
        .iter()
        .map(|r| r.run(if Some(r.name.as_str()) == corrupt { 1.01 } else { 1.0 }))
        .collect())
}

pub fn format_table(results: &[GradResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
    let mut out = format!("{:<width$}  {:>12}  {:>9}  result\n", "row", "rel_error", "tolerance");
    for r in results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{:<width$}  {:>12.3e}  {:>9.0e}  {status}", r.name, r.rel_error, r.tolerance));
        if let Some(e) = &r.error {
            out.push_str(&format!("  ({e})"));
        }
        out.push('\n');
    }
    out
}
