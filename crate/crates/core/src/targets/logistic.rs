//! Standard logistic density, the canonical non-Gaussian example with a
//! certified grad-log-Lipschitz score.
//!
//! `log pi(x) = -x - 2 log(1 + e^{-x})`, so the score is `1 - 2 F(x)` with
//! `F` the logistic CDF. `(log pi)'' = -2 F (1 - F)` lies in [-1/2, 0],
//! giving L = 1/2.

use crate::linalg::{Matrix, SpdMatrix};
use crate::rng::RngStream;

use super::Target;

#[derive(Clone, Debug, Default)]
pub struct Logistic1d;

pub fn make_logistic_1d() -> Logistic1d {
    Logistic1d
}

#[inline]
fn logistic_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Target for Logistic1d {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> String {
        "logistic".into()
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        let x = x[0];
        if x >= 0.0 {
            -x - 2.0 * f64::ln_1p((-x).exp())
        } else {
            x - 2.0 * f64::ln_1p(x.exp())
        }
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        vec![1.0 - 2.0 * logistic_cdf(x[0])]
    }

    fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        // inverse CDF
        let u = rng.uniform_open();
        vec![(u / (1.0 - u)).ln()]
    }

    fn normalized(&self) -> bool {
        true
    }

    fn hessian(&self, x: &[f64]) -> Option<Matrix> {
        let f = logistic_cdf(x[0]);
        Some(Matrix::from_rows(&[vec![-2.0 * f * (1.0 - f)]]).expect("1x1"))
    }

    fn lipschitz_l(&self) -> Option<f64> {
        Some(0.5)
    }

    fn sigma(&self) -> Option<SpdMatrix> {
        // E[(1 - 2U)^2] = 1/3 for U uniform
        Some(SpdMatrix::diag(&[1.0 / 3.0]).expect("positive"))
    }

    fn gamma(&self) -> Option<SpdMatrix> {
        Some(SpdMatrix::diag(&[std::f64::consts::PI.powi(2) / 3.0]).expect("positive"))
    }

    fn var_log_pdf(&self) -> Option<f64> {
        // log pi(X) = log(U(1-U)) with U uniform; Var = 4 - pi^2/3
        Some(4.0 - std::f64::consts::PI.powi(2) / 3.0)
    }
}
