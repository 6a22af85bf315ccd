//! 2-D convolution with zero padding.
//!
//! The fast path lowers each sample to an im2col matrix and calls a GEMM.
//! [`conv2d_forward_naive`] is the direct nested-loop definition and serves as
//! the correctness reference for the fast path.

use crate::error::{Error, Result};
use crate::kernels::for_each_sample;
use crate::tensor::Tensor;

/// Resolved extents of one convolution call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(input: &[usize], weight: &[usize], stride: usize, pad: usize) -> Result<Self> {
        let [batch, in_channels, height, width] = *input else {
            return Err(Error::shape(format!("conv2d input must be rank 4, got {input:?}")));
        };
        let [out_channels, w_in, kernel_h, kernel_w] = *weight else {
            return Err(Error::shape(format!("conv2d weight must be rank 4, got {weight:?}")));
        };
        if w_in != in_channels {
            return Err(Error::shape(format!(
                "conv2d input has {in_channels} channels but weight expects {w_in}"
            )));
        }
        if stride == 0 {
            return Err(Error::shape("conv2d stride must be >= 1"));
        }
        let out_extent = |n: usize, k: usize| -> Result<usize> {
            let padded = n + 2 * pad;
            if padded < k {
                return Err(Error::shape(format!(
                    "conv2d output extent is non-positive (input {n}, pad {pad}, kernel {k})"
                )));
            }
            Ok((padded - k) / stride + 1)
        };
        Ok(ConvGeometry {
            batch,
            in_channels,
            height,
            width,
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            pad,
            out_h: out_extent(height, kernel_h)?,
            out_w: out_extent(width, kernel_w)?,
        })
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.batch, self.out_channels, self.out_h, self.out_w]
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    fn out_pixels(&self) -> usize {
        self.out_h * self.out_w
    }

    fn in_sample_len(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    fn out_sample_len(&self) -> usize {
        self.out_channels * self.out_pixels()
    }

    /// Input coordinate for output index `o` and kernel tap `k`, if inside the image.
    #[inline]
    fn source(&self, o: usize, k: usize, extent: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.pad as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }
}

fn check_bias(bias: Option<&Tensor>, g: &ConvGeometry) -> Result<()> {
    if let Some(b) = bias {
        b.expect_shape(&[g.out_channels], "conv2d bias")?;
    }
    Ok(())
}

fn im2col(x: &[f64], g: &ConvGeometry, cols: &mut [f64]) {
    let p = g.out_pixels();
    for c in 0..g.in_channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for u in 0..g.kernel_h {
            for v in 0..g.kernel_w {
                let row = ((c * g.kernel_h + u) * g.kernel_w + v) * p;
                for i in 0..g.out_h {
                    let dst = &mut cols[row + i * g.out_w..row + (i + 1) * g.out_w];
                    match g.source(i, u, g.height) {
                        None => dst.fill(0.0),
                        Some(y) => {
                            let src = &plane[y * g.width..(y + 1) * g.width];
                            for (j, d) in dst.iter_mut().enumerate() {
                                *d = g.source(j, v, g.width).map_or(0.0, |xx| src[xx]);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn col2im(cols: &[f64], g: &ConvGeometry, x: &mut [f64]) {
    let p = g.out_pixels();
    for c in 0..g.in_channels {
        let plane = &mut x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for u in 0..g.kernel_h {
            for v in 0..g.kernel_w {
                let row = ((c * g.kernel_h + u) * g.kernel_w + v) * p;
                for i in 0..g.out_h {
                    let Some(y) = g.source(i, u, g.height) else {
                        continue;
                    };
                    let src = &cols[row + i * g.out_w..row + (i + 1) * g.out_w];
                    for (j, s) in src.iter().enumerate() {
                        if let Some(xx) = g.source(j, v, g.width) {
                            plane[y * g.width + xx] += s;
                        }
                    }
                }
            }
        }
    }
}

/// `c = a * b + beta * c` with explicit row/column strides for `a` and `b`;
/// `c` is dense row-major `m x n`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every element the strides can reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out[b,o,i,j] = bias[o] + sum_{c,u,v} weight[o,c,u,v] * in_padded[b,c,i*s+u,j*s+v]`.
pub fn conv2d_forward(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let g = ConvGeometry::new(input.shape(), weight.shape(), stride, pad)?;
    check_bias(bias, &g)?;
    let mut out = Tensor::zeros(&g.output_shape());
    let (k, p) = (g.patch_len(), g.out_pixels());
    let w = weight.data();
    let x = input.data();
    for_each_sample(out.data_mut(), g.out_sample_len(), |b, dst| {
        let mut cols = vec![0.0; k * p];
        im2col(&x[b * g.in_sample_len()..(b + 1) * g.in_sample_len()], &g, &mut cols);
        if let Some(bias) = bias {
            for (o, chunk) in dst.chunks_mut(p).enumerate() {
                chunk.fill(bias.data()[o]);
            }
        }
        gemm(g.out_channels, k, p, w, (k, 1), &cols, (p, 1), 1.0, dst);
    });
    out.debug_check_finite("conv2d_forward");
    Ok(out)
}

/// Gradient w.r.t. the convolution input only.
pub fn conv2d_backward_input(
    grad_out: &Tensor,
    input_shape: &[usize],
    weight: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let g = ConvGeometry::new(input_shape, weight.shape(), stride, pad)?;
    grad_out.expect_shape(&g.output_shape(), "conv2d grad_out")?;
    let (k, p) = (g.patch_len(), g.out_pixels());
    let mut grad_in = Tensor::zeros(input_shape);
    let w = weight.data();
    let go = grad_out.data();
    for_each_sample(grad_in.data_mut(), g.in_sample_len(), |b, dst| {
        let mut cols = vec![0.0; k * p];
        let gs = &go[b * g.out_sample_len()..(b + 1) * g.out_sample_len()];
        // cols (k x p) = weight^T (k x cout) * grad_out (cout x p)
        gemm(k, g.out_channels, p, w, (1, k), gs, (p, 1), 0.0, &mut cols);
        col2im(&cols, &g, dst);
    });
    Ok(grad_in)
}

/// Gradients w.r.t. weight and bias. Per-sample partial sums are reduced in
/// batch order so the result does not depend on threading.
pub fn conv2d_backward_params(
    grad_out: &Tensor,
    input: &Tensor,
    weight_shape: &[usize],
    stride: usize,
    pad: usize,
) -> Result<(Tensor, Tensor)> {
    let g = ConvGeometry::new(input.shape(), weight_shape, stride, pad)?;
    grad_out.expect_shape(&g.output_shape(), "conv2d grad_out")?;
    let (k, p) = (g.patch_len(), g.out_pixels());
    let wlen = g.out_channels * k;
    let mut partial = vec![0.0; g.batch * wlen];
    let x = input.data();
    let go = grad_out.data();
    for_each_sample(&mut partial, wlen, |b, dst| {
        let mut cols = vec![0.0; k * p];
        im2col(&x[b * g.in_sample_len()..(b + 1) * g.in_sample_len()], &g, &mut cols);
        let gs = &go[b * g.out_sample_len()..(b + 1) * g.out_sample_len()];
        // dW (cout x k) = grad_out (cout x p) * cols^T (p x k)
        gemm(g.out_channels, p, k, gs, (p, 1), &cols, (1, p), 0.0, dst);
    });
    let mut grad_w = Tensor::zeros(weight_shape);
    for chunk in partial.chunks(wlen) {
        for (a, b) in grad_w.data_mut().iter_mut().zip(chunk) {
            *a += b;
        }
    }
    let mut grad_b = Tensor::zeros(&[g.out_channels]);
    for b in 0..g.batch {
        for o in 0..g.out_channels {
            let start = b * g.out_sample_len() + o * p;
            grad_b.data_mut()[o] += go[start..start + p].iter().sum::<f64>();
        }
    }
    Ok((grad_w, grad_b))
}

/// Analytic gradients `(grad_input, grad_weight, grad_bias)` of [`conv2d_forward`].
pub fn conv2d_backward(
    grad_out: &Tensor,
    input: &Tensor,
    weight: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<(Tensor, Tensor, Tensor)> {
    let gi = conv2d_backward_input(grad_out, input.shape(), weight, stride, pad)?;
    let (gw, gb) = conv2d_backward_params(grad_out, input, weight.shape(), stride, pad)?;
    Ok((gi, gw, gb))
}

/// Direct nested-loop convolution; summation order is bias, then channel,
/// kernel row, kernel column.
pub fn conv2d_forward_naive(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let g = ConvGeometry::new(input.shape(), weight.shape(), stride, pad)?;
    check_bias(bias, &g)?;
    let x = input.data();
    let w = weight.data();
    let mut out = Tensor::zeros(&g.output_shape());
    let o_data = out.data_mut();
    for b in 0..g.batch {
        for o in 0..g.out_channels {
            for i in 0..g.out_h {
                for j in 0..g.out_w {
                    let mut acc = bias.map_or(0.0, |t| t.data()[o]);
                    for c in 0..g.in_channels {
                        for u in 0..g.kernel_h {
                            let Some(y) = g.source(i, u, g.height) else {
                                continue;
                            };
                            for v in 0..g.kernel_w {
                                let Some(xx) = g.source(j, v, g.width) else {
                                    continue;
                                };
                                acc += w[((o * g.in_channels + c) * g.kernel_h + u) * g.kernel_w
                                    + v]
                                    * x[((b * g.in_channels + c) * g.height + y) * g.width + xx];
                            }
                        }
                    }
                    o_data[((b * g.out_channels + o) * g.out_h + i) * g.out_w + j] = acc;
                }
            }
        }
    }
    Ok(out)
}
