use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `out[b] = weight * flatten(input[b]) + bias`; weight is `(out, in)`.
pub fn dense_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (batch, features) = flat_dims(input)?;
    let [outputs, w_in] = *weight.shape() else {
        return Err(Error::shape(format!("dense weight must be rank 2, got {:?}", weight.shape())));
    };
    if w_in != features {
        return Err(Error::shape(format!(
            "dense layer expects {w_in} input features, got {features}"
        )));
    }
    bias.expect_shape(&[outputs], "dense bias")?;
    let x = input.data();
    let w = weight.data();
    let out = Tensor::from_fn(&[batch, outputs], |idx| {
        let (n, o) = (idx / outputs, idx % outputs);
        let row = &w[o * features..(o + 1) * features];
        let xs = &x[n * features..(n + 1) * features];
        bias.data()[o] + row.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>()
    });
    Ok(out)
}

/// Returns `(grad_input, grad_weight, grad_bias)`; `grad_input` has the
/// original (unflattened) input shape.
pub fn dense_backward(
    grad_out: &Tensor,
    input: &Tensor,
    weight: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (batch, features) = flat_dims(input)?;
    let outputs = weight.shape()[0];
    grad_out.expect_shape(&[batch, outputs], "dense grad_out")?;
    let x = input.data();
    let w = weight.data();
    let go = grad_out.data();
    let mut gi = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(weight.shape());
    let mut gb = Tensor::zeros(&[outputs]);
    for n in 0..batch {
        for o in 0..outputs {
            let g = go[n * outputs + o];
            gb.data_mut()[o] += g;
            let xs = &x[n * features..(n + 1) * features];
            let gw_row = &mut gw.data_mut()[o * features..(o + 1) * features];
            for (a, b) in gw_row.iter_mut().zip(xs) {
                *a += g * b;
            }
            let w_row = &w[o * features..(o + 1) * features];
            let gi_row = &mut gi.data_mut()[n * features..(n + 1) * features];
            for (a, b) in gi_row.iter_mut().zip(w_row) {
                *a += g * b;
            }
        }
    }
    Ok((gi, gw, gb))
}

fn flat_dims(input: &Tensor) -> Result<(usize, usize)> {
    if input.rank() < 2 {
        return Err(Error::shape(format!(
            "dense input needs a batch axis, got {:?}",
            input.shape()
        )));
    }
    let batch = input.shape()[0];
    Ok((batch, input.numel() / batch))
}
