//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Built with `harness = false`.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vsrgan::data::{cubic_kernel, imresize_bicubic, synth_dataset, Dataset, SynthParams};
use vsrgan::evaluate::evaluate;
use vsrgan::kernels::{self, conv::conv2d_forward};
use vsrgan::losses::{charbonnier, gan_losses, total_loss, GanMode, LossWeights, CHARBONNIER_EPS};
use vsrgan::metrics::{psnr, ssim};
use vsrgan::plot::loss_curves_svg;
use vsrgan::training::{
    dataset_mse, dataset_psnr, pretrain, train_gan, transfer_from_checkpoint, RunOptions, TrainConfig,
};
use vsrgan::{
    grad_suite, Checkpoint, Discriminator, DiscriminatorConfig, FeatureNet, FeatureNetSpec, Generator, GeneratorConfig,
    Network, Tensor,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn out_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&dir).expect("create output directory");
    dir
}

fn desk_generator() -> GeneratorConfig {
    GeneratorConfig { base_channels: 16, num_res_blocks: 3, ..Default::default() }
}

fn desk_training() -> TrainConfig {
    TrainConfig {
        batch_size: 12,
        pretrain_epochs: 125,
        lr_drop_epochs: vec![75, 110],
        gan_epochs: 50,
        ..Default::default()
    }
}

fn fixture() -> Dataset {
    synth_dataset(&SynthParams::default()).expect("fixture dataset")
}

// ---------------------------------------------------------------- gradients

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let results = grad_suite::run("all", None).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.name.clone()).collect();
    let layer_ok = results
        .iter()
        .filter(|r| r.layer != "generator" && r.layer != "discriminator")
        .all(|r| r.tolerance <= 1e-6);
    let worst = results.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    check(
        failed.is_empty() && layer_ok && secs < 60.0,
        format!("{} rows, worst rel error {worst:.2e}, {secs:.3} s, failed {failed:?}", results.len()),
    )
}

// ---------------------------------------------------------------- convolution

/// Straight translation of the convolution definition with zero padding.
fn conv_oracle(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Tensor {
    let (n, c, h, wd) = x.dims4().unwrap();
    let (o, _, kh, kw) = w.dims4().unwrap();
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; n * o * oh * ow];
    for bi in 0..n {
        for oc in 0..o {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = b.data()[oc];
                    for ic in 0..c {
                        for u in 0..kh {
                            for v in 0..kw {
                                let yy = (i * stride + u) as i64 - pad as i64;
                                let xx = (j * stride + v) as i64 - pad as i64;
                                if yy < 0 || xx < 0 || yy >= h as i64 || xx >= wd as i64 {
                                    continue;
                                }
                                acc += w.data()[((oc * c + ic) * kh + u) * kw + v]
                                    * x.data()[((bi * c + ic) * h + yy as usize) * wd + xx as usize];
                            }
                        }
                    }
                    out[((bi * o + oc) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    Tensor::new(&[n, o, oh, ow], out).unwrap()
}

fn convolution_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = [1usize, 3, 5][rng.random_range(0..3)];
        let stride = rng.random_range(1..=2);
        let pad = rng.random_range(0..=k / 2);
        let (n, c, o) = (rng.random_range(1..=3), rng.random_range(1..=6), rng.random_range(1..=6));
        let h = rng.random_range(k.max(2)..=12);
        let w = rng.random_range(k.max(2)..=12);
        let x = Tensor::uniform(&[n, c, h, w], -1.0, 1.0, &mut rng);
        let wt = Tensor::uniform(&[o, c, k, k], -1.0, 1.0, &mut rng);
        let b = Tensor::uniform(&[o], -1.0, 1.0, &mut rng);
        let fast = conv2d_forward(&x, &wt, Some(&b), stride, pad).map_err(|e| e.to_string())?;
        worst = worst.max(fast.max_abs_diff(&conv_oracle(&x, &wt, &b, stride, pad)));
    }
    check(worst <= 1e-10, format!("100 shapes, max abs diff {worst:.2e}"))
}

// ---------------------------------------------------------------- resampler

/// Full 2-D weighted sum over every source pixel; out-of-range taps are
/// folded onto the nearest border pixel and each axis weight row is
/// normalized to one.
fn resize_oracle(img: &Tensor, oh: usize, ow: usize, antialias: bool) -> Tensor {
    let axis = |n: usize, m: usize| -> Vec<Vec<f64>> {
        let s = m as f64 / n as f64;
        let k = if antialias && s < 1.0 { s } else { 1.0 };
        (0..m)
            .map(|i| {
                let u = (i as f64 + 0.5) / s - 0.5;
                let mut row = vec![0.0; n];
                for j in -(8 * n as i64)..(9 * n as i64) {
                    row[j.clamp(0, n as i64 - 1) as usize] += k * cubic_kernel(k * (u - j as f64));
                }
                let t: f64 = row.iter().sum();
                row.iter().map(|v| v / t).collect()
            })
            .collect()
    };
    let [c, h, w] = [img.shape()[0], img.shape()[1], img.shape()[2]];
    let (ry, rx) = (axis(h, oh), axis(w, ow));
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = 0.0;
                for y in 0..h {
                    for x in 0..w {
                        acc += ry[i][y] * rx[j][x] * img.data()[(ch * h + y) * w + x];
                    }
                }
                out[(ch * oh + i) * ow + j] = acc;
            }
        }
    }
    Tensor::new(&[c, oh, ow], out).unwrap()
}

fn resampler_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    let cases = [(12, 12, 24, 24, false), (24, 18, 12, 9, true), (20, 16, 5, 4, true), (9, 7, 27, 21, true), (16, 16, 11, 13, true)];
    for &(h, w, oh, ow, aa) in &cases {
        let img = Tensor::uniform(&[2, h, w], 0.0, 1.0, &mut rng);
        let got = imresize_bicubic(&img, oh, ow, aa).map_err(|e| e.to_string())?;
        worst = worst.max(got.max_abs_diff(&resize_oracle(&img, oh, ow, aa)));
    }
    let mut constants_exact = true;
    for &(h, w, oh, ow, aa) in &cases {
        let img = Tensor::full(&[1, h, w], 0.3712);
        let got = imresize_bicubic(&img, oh, ow, aa).map_err(|e| e.to_string())?;
        constants_exact &= got.data().iter().all(|&v| v == 0.3712);
    }
    let kernel_exact = cubic_kernel(0.0) == 1.0
        && cubic_kernel(1.0) == 0.0
        && cubic_kernel(0.5) == 0.5625
        && cubic_kernel(1.5) == -0.0625;
    check(
        worst <= 1e-10 && constants_exact && kernel_exact,
        format!("max abs diff {worst:.2e}, constants exact {constants_exact}, kernel values exact {kernel_exact}"),
    )
}

// ---------------------------------------------------------------- architecture

fn architecture_counts() -> Outcome {
    let g = Generator::new(GeneratorConfig::default(), 0).map_err(|e| e.to_string())?;
    let fewer = Generator::new(GeneratorConfig { num_res_blocks: 14, ..Default::default() }, 0).map_err(|e| e.to_string())?;
    let analytic = 640 + 184_384 + 36_928 + 30 * 36_928 + 577;
    let delta = g.param_count() - fewer.param_count();
    check(
        g.conv_count() == 34 && g.num_res_blocks() == 15 && g.param_count() == analytic && analytic == 1_330_369 && delta == 73_856,
        format!(
            "{} convs, {} blocks, {} params, one block = {delta}",
            g.conv_count(),
            g.num_res_blocks(),
            g.param_count()
        ),
    )
}

// ---------------------------------------------------------------- losses

fn loss_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Tensor::uniform(&[2, 1, 36, 36], 0.0, 1.0, &mut rng);
    let (floor, _) = charbonnier(&x, &x, CHARBONNIER_EPS).map_err(|e| e.to_string())?;
    let floor_err = (floor - x.numel() as f64 * 1e-3).abs();

    let xhat = Tensor::uniform(&[2, 1, 36, 36], 0.0, 1.0, &mut rng);
    let mut d = Discriminator::new(DiscriminatorConfig::default(), 1).map_err(|e| e.to_string())?;
    let mut f = FeatureNet::new(FeatureNetSpec::default()).map_err(|e| e.to_string())?;
    let w = LossWeights { alpha: 0.0, beta: 0.0, epsilon: CHARBONNIER_EPS };
    let t = total_loss(&x, &xhat, &mut d, &mut f, &w, Default::default()).map_err(|e| e.to_string())?;
    let (pix, _) = charbonnier(&xhat, &x, CHARBONNIER_EPS).map_err(|e| e.to_string())?;
    let bit_equal = t.total.to_bits() == pix.to_bits();

    let half = Tensor::full(&[4, 1], 0.5);
    let gl = gan_losses(&half, &half, GanMode::Minimax).map_err(|e| e.to_string())?;
    let gan_err = (gl.loss_d - 2.0 * std::f64::consts::LN_2).abs();
    check(
        floor_err <= 1e-12 * floor && bit_equal && gan_err <= 1e-12,
        format!("floor error {floor_err:.1e}, pixel-only objective bit-equal {bit_equal}, L_D(0.5) error {gan_err:.1e}"),
    )
}

// ---------------------------------------------------------------- schedule

fn schedule_fidelity() -> Outcome {
    let cfg = TrainConfig::default();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-15 * b;
    let lrs = [cfg.lr_at_epoch(0), cfg.lr_at_epoch(50), cfg.lr_at_epoch(75)];
    let (g, d) = (cfg.generator_gan_adam(), cfg.discriminator_adam());
    check(
        close(lrs[0], 1e-3)
            && close(lrs[1], 1e-4)
            && close(lrs[2], 1e-5)
            && close(cfg.lr_at_epoch(49), 1e-3)
            && g.lr == 1e-4
            && d.lr == 1e-4
            && g.weight_decay == 1e-4
            && d.weight_decay == 1e-3
            && cfg.pretrain_adam(0).weight_decay == 0.0,
        format!(
            "lr {:?}; GAN G lr {} decay {}, D lr {} decay {}",
            lrs, g.lr, g.weight_decay, d.lr, d.weight_decay
        ),
    )
}

// ---------------------------------------------------------------- overfit

struct Trained {
    generator: Generator,
    data: Dataset,
}

fn overfit_smoke(trained: &mut Option<Trained>) -> Outcome {
    let data = fixture();
    let cfg = desk_training();
    let mut g = Generator::new(desk_generator(), 7).map_err(|e| e.to_string())?;
    let before = dataset_mse(&g, &data, 16).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let outcome = pretrain(&mut g, &data, &cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let after = dataset_mse(&g, &data, 16).map_err(|e| e.to_string())?;
    let db = dataset_psnr(&g, &data, 16).map_err(|e| e.to_string())?;
    outcome.log.save(out_dir().join("pretrain.csv")).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} samples, {} iterations, MSE {before:.3e} -> {after:.3e} ({:.0}x), {db:.2} dB, {secs:.0} s",
        data.len(),
        outcome.steps,
        before / after
    );
    let ok = data.len() == 48 && outcome.steps == 500 && before / after >= 100.0 && db >= 35.0 && secs < 600.0;
    *trained = Some(Trained { generator: g, data });
    check(ok, detail)
}

// ---------------------------------------------------------------- GAN stability

fn gan_stability(trained: &Option<Trained>) -> Outcome {
    let t = trained.as_ref().ok_or("needs the pretrained model")?;
    let mut logs = Vec::new();
    let mut final_d = Vec::new();
    for (name, mode) in [("charbonnier", vsrgan::losses::DistanceKind::Charbonnier), ("l2", vsrgan::losses::DistanceKind::L2)] {
        let cfg = TrainConfig { charbonnier_mode: mode, ..desk_training() };
        let mut g = t.generator.clone();
        let mut d = Discriminator::new(DiscriminatorConfig::default(), 11).map_err(|e| e.to_string())?;
        let mut f = FeatureNet::new(FeatureNetSpec::default()).map_err(|e| e.to_string())?;
        let outcome = train_gan(&mut g, &mut d, &mut f, &t.data, &cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
        let last = outcome.log.last().ok_or("empty GAN log")?.loss_d;
        outcome.log.save(out_dir().join(format!("gan_{name}.csv"))).map_err(|e| e.to_string())?;
        final_d.push((name, outcome.steps, last, outcome.log.collapse_step));
        logs.push((name.to_string(), outcome.log));
    }
    let svg = out_dir().join("gan_losses.svg");
    fs::write(&svg, loss_curves_svg("discriminator and generator losses", &logs)).map_err(|e| e.to_string())?;
    let (_, steps, ld, _) = final_d[0];
    let (_, l2_steps, l2_ld, l2_collapse) = final_d[1];
    check(
        steps == 200 && ld.is_finite() && ld > 0.05 && l2_steps == 200,
        format!(
            "charbonnier final L_D {ld:.4}; l2 final L_D {l2_ld:.4}, collapse step {l2_collapse:?}; curves in {}",
            svg.display()
        ),
    )
}

// ---------------------------------------------------------------- ablation

fn ablation(trained: &Option<Trained>) -> Outcome {
    let t = trained.as_ref().ok_or("needs the pretrained model")?;
    let f = FeatureNet::new(FeatureNetSpec::default()).map_err(|e| e.to_string())?;
    let full = evaluate(&t.generator, &t.data, &f, t.data.scale, false, "full").map_err(|e| e.to_string())?;
    let center = evaluate(&t.generator, &t.data, &f, t.data.scale, true, "center").map_err(|e| e.to_string())?;
    check(
        center.mean_psnr <= full.mean_psnr,
        format!("full {:.2} dB, center frame only {:.2} dB", full.mean_psnr, center.mean_psnr),
    )
}

// ---------------------------------------------------------------- transfer

fn transfer(trained: &Option<Trained>) -> Outcome {
    let t = trained.as_ref().ok_or("needs the pretrained model")?;
    let x4 = synth_dataset(&SynthParams { scale: 4, seed: 3, ..Default::default() }).map_err(|e| e.to_string())?;
    let ckpt = Checkpoint::from_network(&t.generator, None);
    let mut moved = Generator::new(desk_generator(), 99).map_err(|e| e.to_string())?;
    transfer_from_checkpoint(&ckpt, &mut moved).map_err(|e| e.to_string())?;

    let idx: Vec<usize> = (0..12).collect();
    let (frames, x) = x4.batch(&idx).map_err(|e| e.to_string())?;
    let a = t.generator.infer(&frames).map_err(|e| e.to_string())?;
    let b = moved.infer(&frames).map_err(|e| e.to_string())?;
    let identical = a.data().iter().zip(b.data()).all(|(u, v)| u.to_bits() == v.to_bits());

    let objective = |g: &Generator| -> Result<f64, String> {
        let mut d = Discriminator::new(DiscriminatorConfig::default(), 11).map_err(|e| e.to_string())?;
        let mut f = FeatureNet::new(FeatureNetSpec::default()).map_err(|e| e.to_string())?;
        let xhat = g.infer(&frames).map_err(|e| e.to_string())?;
        let cfg = desk_training();
        Ok(total_loss(&x, &xhat, &mut d, &mut f, &cfg.loss_weights, cfg.objective()).map_err(|e| e.to_string())?.total)
    };
    let fresh = Generator::new(desk_generator(), 99).map_err(|e| e.to_string())?;
    let (lt, lf) = (objective(&moved)?, objective(&fresh)?);
    check(
        identical && lt <= lf,
        format!("forward bit-identical {identical}; x4 objective transferred {lt:.4} vs fresh {lf:.4}"),
    )
}

// ---------------------------------------------------------------- persistence

fn end_to_end_bytes() -> Result<(Vec<u8>, Vec<u8>, String), String> {
    let data = synth_dataset(&SynthParams { video_frames: 5, seed: 4, ..Default::default() }).map_err(|e| e.to_string())?;
    let gen_cfg = GeneratorConfig { base_channels: 8, num_res_blocks: 1, ..Default::default() };
    let cfg = TrainConfig { batch_size: 4, pretrain_epochs: 2, lr_drop_epochs: vec![1], gan_epochs: 1, ..Default::default() };
    let mut g = Generator::new(gen_cfg, 1).map_err(|e| e.to_string())?;
    pretrain(&mut g, &data, &cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
    let mut d = Discriminator::new(DiscriminatorConfig::default(), 2).map_err(|e| e.to_string())?;
    let mut f = FeatureNet::new(FeatureNetSpec::default()).map_err(|e| e.to_string())?;
    let out = train_gan(&mut g, &mut d, &mut f, &data, &cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
    Ok((data.to_bytes(), Checkpoint::from_network(&g, Some(out.steps)).to_bytes(), out.log.to_csv()))
}

fn persistence() -> Outcome {
    let data = synth_dataset(&SynthParams { video_frames: 5, ..Default::default() }).map_err(|e| e.to_string())?;
    let dir = out_dir();
    let dpath = dir.join("persist.vsrd");
    data.save(&dpath).map_err(|e| e.to_string())?;
    let reloaded = Dataset::load(&dpath).map_err(|e| e.to_string())?;
    let data_rt = reloaded.to_bytes() == fs::read(&dpath).map_err(|e| e.to_string())? && reloaded.samples == data.samples;

    let g = Generator::new(desk_generator(), 3).map_err(|e| e.to_string())?;
    let bytes = Checkpoint::from_network(&g, Some(17)).to_bytes();
    let cpath = dir.join("persist.vsrc");
    fs::write(&cpath, &bytes).map_err(|e| e.to_string())?;
    let ck = Checkpoint::load(&cpath).map_err(|e| e.to_string())?;
    let ckpt_rt = ck.to_bytes() == bytes;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut undetected = 0;
    let trials = 200;
    for _ in 0..trials {
        let mut bad = bytes.clone();
        let i = rng.random_range(0..bad.len());
        bad[i] ^= 1 << rng.random_range(0..8);
        if Checkpoint::from_bytes(&bad).is_ok() {
            undetected += 1;
        }
    }
    let (d1, c1, l1) = end_to_end_bytes()?;
    let (d2, c2, l2) = end_to_end_bytes()?;
    let reproducible = d1 == d2 && c1 == c2 && l1 == l2;
    check(
        data_rt && ckpt_rt && undetected == 0 && reproducible,
        format!(
            "dataset round trip {data_rt}, checkpoint round trip {ckpt_rt}, {undetected}/{trials} corruptions undetected, end-to-end reproducible {reproducible}"
        ),
    )
}

// ---------------------------------------------------------------- metrics

/// SSIM straight from its definition: Gaussian-weighted moments over each
/// full 11x11 window.
fn ssim_oracle(a: &Tensor, b: &Tensor) -> f64 {
    let (h, w) = (a.shape()[0], a.shape()[1]);
    let mut g = [[0.0; 11]; 11];
    let mut total = 0.0;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    let mut count = 0;
    for y in 0..=h - 11 {
        for x in 0..=w - 11 {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let wgt = g[i][j] / total;
                    let (u, v) = (a.data()[(y + i) * w + x + j], b.data()[(y + i) * w + x + j]);
                    ma += wgt * u;
                    mb += wgt * v;
                    saa += wgt * u * u;
                    sbb += wgt * v * v;
                    sab += wgt * u * v;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = Tensor::uniform(&[24, 24], 0.0, 0.9, &mut rng);
    let shifted = x.map(|v| v + 0.1);
    let p = psnr(&x, &shifted, 1.0, 0).map_err(|e| e.to_string())?;
    let self_ssim = ssim(&x, &x, 1.0, 0).map_err(|e| e.to_string())?;
    let noisy = x.zip_map(&Tensor::uniform(&[24, 24], -0.1, 0.1, &mut rng), |a, b| a + b).map_err(|e| e.to_string())?;
    let s = ssim(&x, &noisy, 1.0, 0).map_err(|e| e.to_string())?;
    let o = ssim_oracle(&x, &noisy);
    check(
        (p - 20.0).abs() <= 1e-9 && (self_ssim - 1.0).abs() <= 1e-12 && (s - o).abs() <= 1e-6,
        format!("PSNR(+0.1) {p:.12} dB, SSIM(x,x) {self_ssim}, SSIM {s:.8} vs oracle {o:.8}"),
    )
}

fn main() {
    kernels::set_deterministic(true);
    let mut trained = None;
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Option<Trained>) -> Outcome>)> = vec![
        ("gradient suite", Box::new(|_| gradient_suite())),
        ("convolution oracle", Box::new(|_| convolution_oracle())),
        ("resampler oracle", Box::new(|_| resampler_oracle())),
        ("architecture counts", Box::new(|_| architecture_counts())),
        ("loss identities", Box::new(|_| loss_identities())),
        ("schedule fidelity", Box::new(|_| schedule_fidelity())),
        ("overfit smoke test", Box::new(overfit_smoke)),
        ("GAN stability", Box::new(|t| gan_stability(t))),
        ("center-frame ablation", Box::new(|t| ablation(t))),
        ("scale transfer", Box::new(|t| transfer(t))),
        ("persistence", Box::new(|_| persistence())),
        ("metric oracles", Box::new(|_| metric_oracles())),
    ];
    let total = criteria.len();
    let mut failures = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let (status, detail) = match run(&mut trained) {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {status} {name}: {detail}", i + 1);
    }
    println!("acceptance: {} of {total} criteria passed", total - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
