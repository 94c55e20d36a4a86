//! Numeric building blocks shared by every other module: dense matrices,
//! the seeded generator, activations, initialization and a central-difference
//! gradient oracle.

mod matrix;
mod rng;

pub use matrix::{gemv_acc, gemv_t_acc, matmul, outer_acc, Matrix};
pub use rng::{hash_bytes, mix64, Rng};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
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

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Exact derivative at `x`. ReLU has derivative 0 at exactly 0.
    #[inline]
    pub fn deriv(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    /// Derivative expressed through the activation's output `y = apply(x)`.
    ///
    /// Valid for every kind because each is monotone: for ReLU, `y > 0` iff `x > 0`.
    #[inline]
    pub fn deriv_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

pub fn activation(kind: Activation, x: f64) -> f64 {
    kind.apply(x)
}

pub fn activation_deriv(kind: Activation, x: f64) -> f64 {
    kind.deriv(x)
}

/// Glorot-uniform matrix: entries uniform on `[-L, L]`, `L = sqrt(6 / (rows + cols))`.
pub fn glorot_init(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let limit = glorot_limit(rows, cols);
    let data = (0..rows * cols)
        .map(|_| rng.uniform(-limit, limit))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches by construction")
}

pub fn glorot_limit(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

/// Central-difference gradient of `loss` at `params`.
pub fn finite_diff_grad<F>(mut loss: F, params: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be > 0, got {eps}"
        )));
    }
    let mut theta = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + eps;
        let up = loss(&theta);
        theta[i] = orig - eps;
        let down = loss(&theta);
        theta[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteLoss { coordinate: i });
        }
        grad.push((up - down) / (2.0 * eps));
    }
    Ok(grad)
}

/// Largest element-wise relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activation_examples() {
        assert_eq!(activation(Activation::Relu, -2.0), 0.0);
        assert_eq!(activation(Activation::Sigmoid, 0.0), 0.5);
        assert_eq!(activation_deriv(Activation::Tanh, 0.0), 1.0);
        assert_eq!(activation_deriv(Activation::Relu, 0.0), 0.0);
        assert_eq!(activation_deriv(Activation::Relu, 1e-300), 1.0);
        assert_eq!(activation(Activation::Identity, -3.5), -3.5);
    }

    #[test]
    fn sigmoid_stable_at_extremes() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for kind in [
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::Identity,
            Activation::Relu,
        ] {
            for &x in &[-1.7, -0.3, 0.4, 2.2] {
                let fd = finite_diff_grad(|p| kind.apply(p[0]), &[x], 1e-6).unwrap()[0];
                assert!((fd - kind.deriv(x)).abs() < 1e-8, "{kind:?} at {x}");
                assert!((kind.deriv_from_output(kind.apply(x)) - kind.deriv(x)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn glorot_deterministic_and_bounded() {
        let a = glorot_init(&mut Rng::new(11), 4, 6);
        let b = glorot_init(&mut Rng::new(11), 4, 6);
        assert_eq!(a, b);
        let c = glorot_init(&mut Rng::new(12), 3, 3);
        assert!(c.as_slice().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn glorot_sample_mean_near_zero() {
        // 10^5 draws; sd of the mean is L/sqrt(3)/sqrt(n) ≈ 0.0018 for L = 1
        let m = glorot_init(&mut Rng::new(2024), 250, 400);
        assert_eq!(m.as_slice().len(), 100_000);
        let limit = glorot_limit(250, 400);
        let mean = m.as_slice().iter().sum::<f64>() / 1e5 / limit;
        assert!(mean.abs() < 0.01, "normalized mean {mean}");
    }

    #[test]
    fn finite_diff_examples() {
        let g = finite_diff_grad(|p| p[0] * p[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);

        let g = finite_diff_grad(|_| 4.2, &[1.0, -2.0, 3.0], 1e-5).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));

        let theta = [0.3, -1.1, 7.0, 1e3];
        let g = finite_diff_grad(|p| p.iter().sum(), &theta, 1e-5).unwrap();
        for v in g {
            assert!((v - 1.0).abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn finite_diff_reports_offending_coordinate() {
        let err = finite_diff_grad(
            |p| if p[2] > 0.5 { f64::NAN } else { p[0] },
            &[0.0, 0.0, 0.5],
            1e-3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { coordinate: 2 }));
        assert!(finite_diff_grad(|p| p[0], &[0.0], 0.0).is_err());
    }
}
