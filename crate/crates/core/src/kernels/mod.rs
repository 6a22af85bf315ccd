//! Differentiable layer kernels. Every forward has a matching analytic
//! backward; all functions are pure in their inputs.

pub mod activation;
pub mod batchnorm;
pub mod combine;
pub mod conv;
pub mod dense;
pub mod pool;

use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;

pub use activation::{leaky_relu_backward, leaky_relu_forward, sigmoid_backward, sigmoid_forward};
pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormCache, BnMode, RunningStats};
pub use combine::{add, add_backward, channel_concat, channel_concat_backward, channel_slice};
pub use conv::{
    conv2d_backward, conv2d_backward_input, conv2d_backward_params, conv2d_forward,
    conv2d_forward_naive, ConvGeometry,
};
pub use dense::{dense_backward, dense_forward};
pub use pool::{avg_pool2_backward, avg_pool2_forward};

static DETERMINISTIC: AtomicBool = AtomicBool::new(false);

/// Forces every kernel onto the calling thread.
///
/// Per-sample work is independent and cross-sample reductions always run in
/// batch order, so results are identical either way; serial mode additionally
/// pins the execution order.
pub fn set_deterministic(on: bool) {
    DETERMINISTIC.store(on, Ordering::SeqCst);
}

pub fn is_deterministic() -> bool {
    DETERMINISTIC.load(Ordering::SeqCst)
}

/// Runs `f(sample_index, chunk)` over consecutive `chunk_len` pieces of `buf`.
pub(crate) fn for_each_sample<F>(buf: &mut [f64], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if is_deterministic() || buf.len() <= chunk_len {
        buf.chunks_mut(chunk_len).enumerate().for_each(|(b, c)| f(b, c));
    } else {
        buf.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(b, c)| f(b, c));
    }
}
