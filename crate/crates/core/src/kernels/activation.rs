use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `x` for `x >= 0`, `slope * x` otherwise. A slope of 0 is ReLU.
pub fn leaky_relu_forward(input: &Tensor, slope: f64) -> Tensor {
    debug_assert!((0.0..1.0).contains(&slope));
    input.map(|x| if x >= 0.0 { x } else { slope * x })
}

/// Subgradient at 0 takes the positive branch.
pub fn leaky_relu_backward(grad_out: &Tensor, input: &Tensor, slope: f64) -> Result<Tensor> {
    grad_out.zip_map(input, |g, x| if x >= 0.0 { g } else { slope * g })
}

pub fn sigmoid_forward(input: &Tensor) -> Result<Tensor> {
    if !input.is_finite() {
        return Err(Error::Numeric("sigmoid input is not finite".into()));
    }
    Ok(input.map(sigmoid))
}

/// Backward in terms of the forward output `s`: `g * s * (1 - s)`.
pub fn sigmoid_backward(grad_out: &Tensor, output: &Tensor) -> Result<Tensor> {
    grad_out.zip_map(output, |g, s| g * s * (1.0 - s))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::gradient_check;

    fn v(data: &[f64]) -> Tensor {
        Tensor::new(&[data.len()], data.to_vec()).unwrap()
    }

    #[test]
    fn relu_and_leaky_values() {
        let x = v(&[-2.0, 0.0, 3.0]);
        assert_eq!(leaky_relu_forward(&x, 0.0).data(), &[0.0, 0.0, 3.0]);
        let y = leaky_relu_forward(&x, 0.2);
        assert!((y.data()[0] + 0.4).abs() < 1e-15);
        assert_eq!(&y.data()[1..], &[0.0, 3.0]);
    }

    #[test]
    fn leaky_backward_matches_finite_differences() {
        let x = v(&[-1.3, -0.2, 0.4, 2.5, -3.0]);
        let w = v(&[0.3, -1.1, 0.7, 2.0, -0.5]);
        let f = |p: &Tensor| -> Result<f64> {
            Ok(leaky_relu_forward(p, 0.2).data().iter().zip(w.data()).map(|(a, b)| a * b).sum())
        };
        let grad = leaky_relu_backward(&w, &x, 0.2).unwrap();
        assert!(gradient_check(f, &grad, &x, 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn sigmoid_symmetry_and_gradient() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
        let x = v(&[-2.0, -0.1, 0.0, 0.8, 4.0]);
        let w = v(&[1.0, -2.0, 0.5, 0.25, 3.0]);
        let s = sigmoid_forward(&x).unwrap();
        let grad = sigmoid_backward(&w, &s).unwrap();
        let f = |p: &Tensor| -> Result<f64> {
            Ok(sigmoid_forward(p)?.data().iter().zip(w.data()).map(|(a, b)| a * b).sum())
        };
        assert!(gradient_check(f, &grad, &x, 1e-5).unwrap() < 1e-6);
        assert!(sigmoid_forward(&v(&[f64::NAN])).is_err());
    }
}
