use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.zip_map(b, |x, y| x + y)
}

/// The upstream gradient flows unchanged into both summands.
pub fn add_backward(grad_out: &Tensor) -> (Tensor, Tensor) {
    (grad_out.clone(), grad_out.clone())
}

/// Concatenates rank-4 tensors along the channel axis.
pub fn channel_concat(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::shape("channel_concat needs at least one input"))?;
    let (b, _, h, w) = first.dims4()?;
    let mut channels = 0;
    for p in parts {
        let (pb, pc, ph, pw) = p.dims4()?;
        if (pb, ph, pw) != (b, h, w) {
            return Err(Error::shape(format!(
                "channel_concat: {:?} does not match {:?} outside the channel axis",
                p.shape(),
                first.shape()
            )));
        }
        channels += pc;
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(b * channels * plane);
    for n in 0..b {
        for p in parts {
            let pc = p.shape()[1];
            data.extend_from_slice(&p.data()[n * pc * plane..(n + 1) * pc * plane]);
        }
    }
    Tensor::new(&[b, channels, h, w], data)
}

/// Channels `[start, start + len)` of a rank-4 tensor.
pub fn channel_slice(input: &Tensor, start: usize, len: usize) -> Result<Tensor> {
    let (b, c, h, w) = input.dims4()?;
    if len == 0 || start + len > c {
        return Err(Error::shape(format!(
            "channel slice {start}..{} out of range for {c} channels",
            start + len
        )));
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(b * len * plane);
    for n in 0..b {
        let from = (n * c + start) * plane;
        data.extend_from_slice(&input.data()[from..from + len * plane]);
    }
    Tensor::new(&[b, len, h, w], data)
}

/// Splits the upstream gradient back into per-input pieces.
pub fn channel_concat_backward(grad_out: &Tensor, channels: &[usize]) -> Result<Vec<Tensor>> {
    let total: usize = channels.iter().sum();
    if grad_out.dims4()?.1 != total {
        return Err(Error::shape(format!(
            "channel_concat_backward: gradient has {} channels, parts sum to {total}",
            grad_out.shape()[1]
        )));
    }
    let mut start = 0;
    channels
        .iter()
        .map(|&c| {
            let s = channel_slice(grad_out, start, c);
            start += c;
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::gradient_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn five_frames_of_64_give_320_maps() {
        let part = Tensor::zeros(&[1, 64, 36, 36]);
        let parts: Vec<&Tensor> = std::iter::repeat(&part).take(5).collect();
        assert_eq!(channel_concat(&parts).unwrap().shape(), &[1, 320, 36, 36]);
    }

    #[test]
    fn slicing_recovers_concat_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Tensor::randn(&[2, 3, 4, 4], 1.0, &mut rng);
        let b = Tensor::randn(&[2, 1, 4, 4], 1.0, &mut rng);
        let cat = channel_concat(&[&a, &b]).unwrap();
        assert_eq!(channel_slice(&cat, 0, 3).unwrap(), a);
        assert_eq!(channel_slice(&cat, 3, 1).unwrap(), b);
        assert!(channel_concat(&[&a, &Tensor::zeros(&[1, 1, 4, 4])]).is_err());
    }

    #[test]
    fn concat_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Tensor::randn(&[2, 2, 3, 3], 1.0, &mut rng);
        let b = Tensor::randn(&[2, 3, 3, 3], 1.0, &mut rng);
        let r = Tensor::randn(&[2, 5, 3, 3], 1.0, &mut rng);
        let grads = channel_concat_backward(&r, &[2, 3]).unwrap();
        let f = |x: &Tensor, y: &Tensor| -> Result<f64> {
            Ok(channel_concat(&[x, y])?.data().iter().zip(r.data()).map(|(p, q)| p * q).sum())
        };
        assert!(gradient_check(|p| f(p, &b), &grads[0], &a, 1e-5).unwrap() < 1e-6);
        assert!(gradient_check(|p| f(&a, p), &grads[1], &b, 1e-5).unwrap() < 1e-6);
    }

    #[test]
    fn add_is_commutative_and_passes_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Tensor::randn(&[3, 4], 1.0, &mut rng);
        let b = Tensor::randn(&[3, 4], 1.0, &mut rng);
        assert_eq!(add(&a, &b).unwrap(), add(&b, &a).unwrap());
        let g = Tensor::randn(&[3, 4], 1.0, &mut rng);
        let (ga, gb) = add_backward(&g);
        assert_eq!(ga, g);
        assert_eq!(gb, g);
        let f = |x: &Tensor| -> Result<f64> {
            Ok(add(x, &b)?.data().iter().zip(g.data()).map(|(p, q)| p * q).sum())
        };
        assert!(gradient_check(f, &ga, &a, 1e-5).unwrap() < 1e-6);
    }
}
