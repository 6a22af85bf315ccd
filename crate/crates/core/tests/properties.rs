use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vsrgan::data::{extract_patches, imresize_bicubic, synth_dataset, synthesize_pair, SynthParams};
use vsrgan::kernels::combine::{channel_concat, channel_slice};
use vsrgan::losses::{charbonnier, gan_losses, GanMode, CHARBONNIER_EPS};
use vsrgan::metrics::{feature_distance, psnr, ssim};
use vsrgan::training::{epoch_batches, pretrain, RunOptions, TrainConfig};
use vsrgan::{Checkpoint, FeatureNet, FeatureNetSpec, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, Tensor};

fn image(seed: u64, h: usize, w: usize) -> Tensor {
    Tensor::uniform(&[h, w], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn resize_keeps_constants(v in 0.0f64..1.0, h in 2usize..20, w in 2usize..20, oh in 1usize..30, ow in 1usize..30, aa: bool) {
        let out = imresize_bicubic(&Tensor::full(&[1, h, w], v), oh, ow, aa).unwrap();
        prop_assert!(out.data().iter().all(|&x| x == v));
    }

    #[test]
    fn resize_stays_within_overshoot_bounds(seed: u64, h in 4usize..16, oh in 2usize..32) {
        let img = Tensor::uniform(&[1, h, h], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let out = imresize_bicubic(&img, oh, oh, true).unwrap();
        prop_assert!(out.data().iter().all(|&x| (-0.25..=1.25).contains(&x)));
    }

    #[test]
    fn ssim_is_symmetric_and_bounded(a in any::<u64>(), b in any::<u64>()) {
        let (x, y) = (image(a, 16, 16), image(b, 16, 16));
        let s1 = ssim(&x, &y, 1.0, 0).unwrap();
        let s2 = ssim(&y, &x, 1.0, 0).unwrap();
        prop_assert!((s1 - s2).abs() < 1e-12);
        prop_assert!(s1 <= 1.0 + 1e-12 && s1 >= -1.0);
        prop_assert!((ssim(&x, &x, 1.0, 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_falls_as_noise_grows(seed: u64, small in 0.01f64..0.1, factor in 1.5f64..4.0) {
        let x = image(seed, 12, 12);
        let noise = Tensor::uniform(&[12, 12], -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let near = x.zip_map(&noise, |a, n| a + small * n).unwrap();
        let far = x.zip_map(&noise, |a, n| a + small * factor * n).unwrap();
        prop_assert!(psnr(&x, &near, 1.0, 0).unwrap() > psnr(&x, &far, 1.0, 0).unwrap());
    }

    #[test]
    fn charbonnier_is_at_least_its_floor(seed: u64) {
        let x = image(seed, 6, 6);
        let y = image(seed.wrapping_add(1), 6, 6);
        let (l, _) = charbonnier(&y, &x, CHARBONNIER_EPS).unwrap();
        prop_assert!(l >= 36.0 * CHARBONNIER_EPS);
    }

    #[test]
    fn gan_losses_are_finite_with_expected_signs(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
        let real = Tensor::full(&[2, 1], p);
        let fake = Tensor::full(&[2, 1], q);
        let mm = gan_losses(&real, &fake, GanMode::Minimax).unwrap();
        let ns = gan_losses(&real, &fake, GanMode::Nonsaturating).unwrap();
        prop_assert!(mm.loss_d.is_finite() && mm.loss_d >= 0.0);
        prop_assert!(mm.loss_g.is_finite() && mm.loss_g <= 0.0);
        prop_assert!(ns.loss_g.is_finite() && ns.loss_g >= 0.0);
        prop_assert_eq!(mm.loss_d, ns.loss_d);
        let real_only = gan_losses(&real, &Tensor::full(&[2, 1], 0.0), GanMode::Minimax).unwrap().loss_d;
        prop_assert!((mm.loss_d - real_only + mm.loss_g).abs() < 1e-9);
    }

    #[test]
    fn batches_partition_the_samples(seed: u64, epoch in 0usize..50, n in 1usize..100, bs in 1usize..20) {
        let batches = epoch_batches(seed, epoch, n, bs);
        let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
        prop_assert_eq!(batches.len(), n.div_ceil(bs));
        prop_assert!(batches.iter().take(batches.len() - 1).all(|b| b.len() == bs));
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn concat_then_slice_recovers_parts(seed: u64, ca in 1usize..4, cb in 1usize..4, h in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Tensor::uniform(&[2, ca, h, 3], -1.0, 1.0, &mut rng);
        let b = Tensor::uniform(&[2, cb, h, 3], -1.0, 1.0, &mut rng);
        let joined = channel_concat(&[&a, &b]).unwrap();
        prop_assert_eq!(channel_slice(&joined, 0, ca).unwrap(), a);
        prop_assert_eq!(channel_slice(&joined, ca, cb).unwrap(), b);
    }

    #[test]
    fn degradation_keeps_hr_and_patches_stay_aligned(seed: u64, scale in 1usize..=4, patch_lr in 4usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = 48;
        let frames: Vec<Tensor> = (0..3).map(|_| Tensor::uniform(&[1, size, size], 0.0, 1.0, &mut rng)).collect();
        let sample = synthesize_pair(&frames, scale, "p").unwrap();
        prop_assert_eq!(&sample.hr_center, &frames[1]);
        let patch = patch_lr * scale;
        for p in extract_patches(&sample, patch, patch).unwrap() {
            let (top, left) = {
                let at = p.source_id.rsplit('@').next().unwrap();
                let mut it = at.split(',').map(|v| v.parse::<usize>().unwrap());
                (it.next().unwrap(), it.next().unwrap())
            };
            for y in 0..patch {
                for x in 0..patch {
                    prop_assert_eq!(p.hr_center.data()[y * patch + x], sample.hr_center.data()[(top + y) * size + left + x]);
                    prop_assert_eq!(p.lr_frames.data()[y * patch + x], sample.lr_frames.data()[(top + y) * size + left + x]);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn discriminator_outputs_are_probabilities(seed: u64, scale in 0.1f64..50.0) {
        let d = Discriminator::new(DiscriminatorConfig::default(), seed).unwrap();
        let x = Tensor::uniform(&[2, 1, 36, 36], -scale, scale, &mut ChaCha8Rng::seed_from_u64(seed));
        let p = d.infer(&x).unwrap();
        prop_assert!(p.data().iter().all(|&v| (0.0..=1.0).contains(&v) && v.is_finite()));
    }

    #[test]
    fn checkpoints_round_trip(seed: u64, blocks in 0usize..3, channels in 1usize..6, step in proptest::option::of(1u64..1000)) {
        let g = Generator::new(GeneratorConfig { base_channels: channels, num_res_blocks: blocks, ..Default::default() }, seed).unwrap();
        let bytes = Checkpoint::from_network(&g, step).to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.optimizer_step(), step);
        prop_assert_eq!(back.to_bytes(), bytes);
        let g2 = back.to_generator().unwrap();
        let y = Tensor::uniform(&[1, 5, 1, 8, 8], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(g.infer(&y).unwrap(), g2.infer(&y).unwrap());
    }

    #[test]
    fn generator_output_matches_input_size(seed: u64, h in 3usize..14, w in 3usize..14, b in 1usize..3) {
        let g = Generator::new(GeneratorConfig { base_channels: 3, num_res_blocks: 1, ..Default::default() }, seed).unwrap();
        let y = Tensor::uniform(&[b, 5, 1, h, w], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let out = g.infer(&y).unwrap();
        prop_assert_eq!(out.shape(), &[b, 1, h, w]);
    }

    #[test]
    fn feature_distance_is_symmetric_and_zero_on_equal(a: u64, b: u64) {
        let f = FeatureNet::new(FeatureNetSpec::default()).unwrap();
        let x = image(a, 12, 12).reshape(&[1, 1, 12, 12]).unwrap();
        let y = image(b, 12, 12).reshape(&[1, 1, 12, 12]).unwrap();
        prop_assert_eq!(feature_distance(&x, &x, &f).unwrap(), 0.0);
        let (d1, d2) = (feature_distance(&x, &y, &f).unwrap(), feature_distance(&y, &x, &f).unwrap());
        prop_assert!((d1 - d2).abs() < 1e-12 && d1 >= 0.0);
    }
}

#[test]
fn pretraining_loss_mostly_falls_over_windows() {
    let data = synth_dataset(&SynthParams { video_frames: 6, ..Default::default() }).unwrap();
    let cfg = TrainConfig { batch_size: 4, pretrain_epochs: 100, lr_drop_epochs: vec![60], ..Default::default() };
    let mut g = Generator::new(GeneratorConfig { base_channels: 8, num_res_blocks: 1, ..Default::default() }, 5).unwrap();
    let log = pretrain(&mut g, &data, &cfg, &RunOptions::default()).unwrap().log;
    let epochs = cfg.pretrain_epochs;
    let per_epoch: Vec<f64> = (0..epochs)
        .map(|e| {
            let rows: Vec<f64> = log.records.iter().filter(|r| r.epoch as usize == e).map(|r| r.loss_g).collect();
            rows.iter().sum::<f64>() / rows.len() as f64
        })
        .collect();
    let steps_per_epoch = log.records.len() / epochs;
    let window = 50usize.div_ceil(steps_per_epoch).max(2);
    let windows: Vec<bool> = per_epoch.windows(window).map(|w| w[w.len() - 1] <= w[0]).collect();
    let falling = windows.iter().filter(|&&b| b).count();
    assert!(falling * 10 >= windows.len() * 9, "{falling} of {} windows fell", windows.len());
}
