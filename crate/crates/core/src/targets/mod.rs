//! The target density zoo.
//!
//! Every target exposes a log-density (possibly unnormalized), its score
//! `grad log pi`, an exact sampler, and, when known in closed form, the
//! score covariance `Sigma = Var(grad log pi(X))`, the state covariance
//! `Gamma = Var(X)`, a Lipschitz constant for the score, and
//! `Var(log pi(X))`. Acceptance ratios, scores and `Var(log pi)` are all
//! invariant to the normalizing constant; the `normalized` flag only gates
//! checks that need the true constant.
//!
//! Targets are pure functions of the state plus immutable parameters, so
//! they are freely shareable across threads; samplers take the caller's
//! `RngStream`.

mod block;
mod gaussian;
mod logistic;
mod rotated;

pub use block::BlockProduct;
pub use gaussian::{make_gaussian, standard_normal_target, Gaussian};
pub use logistic::{make_logistic_1d, Logistic1d};
pub use rotated::{logistic_product, make_rotated_scale_family, RotatedScaleFamily};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::linalg::SpdMatrix;
use crate::rng::RngStream;

pub trait Target: Send + Sync {
    /// Block dimension k.
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    /// Log-density, up to an additive constant unless `normalized`.
    fn log_pdf(&self, x: &[f64]) -> f64;

    /// Score `grad log pi(x)`.
    fn score(&self, x: &[f64]) -> Vec<f64>;

    /// Exact draw from the density.
    fn sample(&self, rng: &mut RngStream) -> Vec<f64>;

    /// Whether `log_pdf` includes the true normalizing constant.
    fn normalized(&self) -> bool {
        false
    }

    /// Hessian `grad^2 log pi(x)` when available in closed form.
    fn hessian(&self, _x: &[f64]) -> Option<Matrix> {
        None
    }

    /// Global Lipschitz constant of the score, when certified.
    fn lipschitz_l(&self) -> Option<f64> {
        None
    }

    /// Closed-form score covariance `Var(grad log pi(X))`.
    fn sigma(&self) -> Option<SpdMatrix> {
        None
    }

    /// Closed-form state covariance `Var(X)`.
    fn gamma(&self) -> Option<SpdMatrix> {
        None
    }

    /// Closed-form `Var(log pi(X))` (additive-constant invariant).
    fn var_log_pdf(&self) -> Option<f64> {
        None
    }
}

/// Central finite-difference gradient of `f`, step `eps^(1/3) max(1, |x_j|)`
/// per coordinate.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let base = f64::EPSILON.powf(1.0 / 3.0);
    let mut out = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = base * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let up = f(&xp);
        xp[j] = x[j] - h;
        let dn = f(&xp);
        xp[j] = x[j];
        out[j] = (up - dn) / (2.0 * h);
    }
    out
}

/// Hessian of `log pi` by central differences of the score, symmetrized;
/// step `eps^(1/3) max(1, ||x||)`.
pub fn fd_hessian_of_score(target: &dyn Target, x: &[f64]) -> Matrix {
    let k = x.len();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = f64::EPSILON.powf(1.0 / 3.0) * norm.max(1.0);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut xp = x.to_vec();
    for j in 0..k {
        xp[j] = x[j] + h;
        let up = target.score(&xp);
        xp[j] = x[j] - h;
        let dn = target.score(&xp);
        xp[j] = x[j];
        cols.push(up.iter().zip(&dn).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    let raw = Matrix::from_fn(k, k, |i, j| cols[j][i]);
    raw.symmetrized()
}

/// Closed-form Hessian when the target provides one, finite differences of
/// the score otherwise.
pub fn hessian_or_fd(target: &dyn Target, x: &[f64]) -> Matrix {
    target
        .hessian(x)
        .unwrap_or_else(|| fd_hessian_of_score(target, x))
}

/// An empirical covariance matrix with per-entry standard errors.
#[derive(Clone, Debug)]
pub struct MatrixEstimate {
    pub matrix: SpdMatrix,
    pub standard_errors: Matrix,
    pub n: usize,
}

fn covariance_estimate(draws: &[Vec<f64>]) -> Result<MatrixEstimate> {
    let n = draws.len();
    let k = draws[0].len();
    let nf = n as f64;
    let mut mean = vec![0.0; k];
    for v in draws {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= nf;
    }
    let mut cov = Matrix::zeros(k, k);
    let mut second = Matrix::zeros(k, k); // running sum of squared centered products
    for v in draws {
        for i in 0..k {
            let ci = v[i] - mean[i];
            for j in 0..k {
                let cj = v[j] - mean[j];
                cov[(i, j)] += ci * cj;
                second[(i, j)] += (ci * cj) * (ci * cj);
            }
        }
    }
    let mut se = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let m1 = cov[(i, j)] / nf;
            let m2 = second[(i, j)] / nf;
            se[(i, j)] = ((m2 - m1 * m1).max(0.0) / nf).sqrt();
            cov[(i, j)] /= nf - 1.0;
        }
    }
    Ok(MatrixEstimate {
        matrix: SpdMatrix::new(cov.symmetrized())?,
        standard_errors: se,
        n,
    })
}

/// Empirical covariance of the score over `n` exact draws.
pub fn estimate_sigma(target: &dyn Target, n: usize, rng: &mut RngStream) -> Result<MatrixEstimate> {
    if n < 100 {
        return Err(Error::InsufficientData(format!(
            "covariance estimation needs n >= 100, got {n}"
        )));
    }
    let draws: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let x = target.sample(rng);
            target.score(&x)
        })
        .collect();
    covariance_estimate(&draws)
}

/// Empirical covariance of the state over `n` exact draws.
pub fn estimate_gamma(target: &dyn Target, n: usize, rng: &mut RngStream) -> Result<MatrixEstimate> {
    if n < 100 {
        return Err(Error::InsufficientData(format!(
            "covariance estimation needs n >= 100, got {n}"
        )));
    }
    let draws: Vec<Vec<f64>> = (0..n).map(|_| target.sample(rng)).collect();
    covariance_estimate(&draws)
}

/// Empirical `Var(log pi(X))` with its standard error.
pub fn estimate_var_log_pdf(target: &dyn Target, n: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
    if n < 100 {
        return Err(Error::InsufficientData(format!(
            "variance estimation needs n >= 100, got {n}"
        )));
    }
    let vals: Vec<f64> = (0..n)
        .map(|_| {
            let x = target.sample(rng);
            target.log_pdf(&x)
        })
        .collect();
    let nf = n as f64;
    let mean = vals.iter().sum::<f64>() / nf;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    // SE of a sample variance via the fourth central moment
    let m4 = vals.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    let se = ((m4 - var * var).max(0.0) / nf).sqrt();
    Ok((var, se))
}
