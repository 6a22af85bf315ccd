use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Non-overlapping 2x2 average pooling; a trailing odd row or column is dropped.
pub fn avg_pool2_forward(input: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = input.dims4()?;
    if h < 2 || w < 2 {
        return Err(Error::shape(format!("avg_pool2 needs at least 2x2, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    Ok(Tensor::from_fn(&[b, c, oh, ow], |idx| {
        let (nc, i, j) = (idx / (oh * ow), (idx / ow) % oh, idx % ow);
        let base = nc * h * w;
        let at = |y: usize, xx: usize| x[base + y * w + xx];
        0.25 * (at(2 * i, 2 * j) + at(2 * i, 2 * j + 1) + at(2 * i + 1, 2 * j) + at(2 * i + 1, 2 * j + 1))
    }))
}

pub fn avg_pool2_backward(grad_out: &Tensor, input_shape: &[usize]) -> Result<Tensor> {
    let [b, c, h, w] = *input_shape else {
        return Err(Error::shape("avg_pool2 input must be rank 4"));
    };
    let (oh, ow) = (h / 2, w / 2);
    grad_out.expect_shape(&[b, c, oh, ow], "avg_pool2 grad_out")?;
    let mut gi = Tensor::zeros(input_shape);
    let go = grad_out.data();
    let gd = gi.data_mut();
    for nc in 0..b * c {
        for i in 0..oh {
            for j in 0..ow {
                let g = 0.25 * go[(nc * oh + i) * ow + j];
                let base = nc * h * w;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    gd[base + (2 * i + dy) * w + 2 * j + dx] += g;
                }
            }
        }
    }
    Ok(gi)
}
