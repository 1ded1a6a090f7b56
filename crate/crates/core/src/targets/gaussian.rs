//! Multivariate normal target N(mu, Gamma).

use crate::error::Result;
use crate::linalg::{Matrix, SpdMatrix};
use crate::mvn::sample_mvn;
use crate::rng::RngStream;

use super::Target;

/// Gaussian density with score `-Gamma^{-1}(x - mu)`. The score covariance
/// is the precision matrix, `Sigma = Gamma^{-1}`.
#[derive(Clone, Debug)]
pub struct Gaussian {
    mu: Vec<f64>,
    gamma: SpdMatrix,
    precision: SpdMatrix,
    lipschitz: f64,
    log_norm: f64,
}

pub fn make_gaussian(mu: Vec<f64>, gamma: SpdMatrix) -> Result<Gaussian> {
    let k = gamma.dim();
    if mu.len() != k {
        return Err(crate::error::Error::DimensionMismatch(format!(
            "mean length {} vs covariance dim {k}",
            mu.len()
        )));
    }
    let precision = gamma.inverse()?;
    let lipschitz = precision.max_eigenvalue()?;
    let log_norm = -0.5 * (k as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * gamma.log_det();
    Ok(Gaussian {
        mu,
        gamma,
        precision,
        lipschitz,
        log_norm,
    })
}

/// Standard normal in k dimensions.
pub fn standard_normal_target(k: usize) -> Gaussian {
    make_gaussian(vec![0.0; k], SpdMatrix::identity(k)).expect("identity covariance")
}

impl Gaussian {
    pub fn mean(&self) -> &[f64] {
        &self.mu
    }

    pub fn covariance(&self) -> &SpdMatrix {
        &self.gamma
    }

    pub fn precision(&self) -> &SpdMatrix {
        &self.precision
    }
}

impl Target for Gaussian {
    fn dim(&self) -> usize {
        self.gamma.dim()
    }

    fn name(&self) -> String {
        format!("gaussian(k={})", self.dim())
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        let k = self.dim();
        debug_assert_eq!(x.len(), k);
        let mut quad = 0.0;
        // (x - mu)' P (x - mu) via the dense precision matrix
        for i in 0..k {
            let di = x[i] - self.mu[i];
            for j in 0..k {
                quad += di * self.precision.entries()[(i, j)] * (x[j] - self.mu[j]);
            }
        }
        self.log_norm - 0.5 * quad
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        let k = self.dim();
        let mut out = vec![0.0; k];
        for i in 0..k {
            let mut acc = 0.0;
            for j in 0..k {
                acc += self.precision.entries()[(i, j)] * (x[j] - self.mu[j]);
            }
            out[i] = -acc;
        }
        out
    }

    fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        sample_mvn(&self.mu, self.gamma.chol_lower(), rng).expect("dimensions agree")
    }

    fn normalized(&self) -> bool {
        true
    }

    fn hessian(&self, _x: &[f64]) -> Option<Matrix> {
        Some(self.precision.entries().scaled(-1.0))
    }

    fn lipschitz_l(&self) -> Option<f64> {
        Some(self.lipschitz)
    }

    fn sigma(&self) -> Option<SpdMatrix> {
        Some(self.precision.clone())
    }

    fn gamma(&self) -> Option<SpdMatrix> {
        Some(self.gamma.clone())
    }

    fn var_log_pdf(&self) -> Option<f64> {
        // log pi(X) is a chi-square_k up to affine terms: Var = k/2
        Some(self.dim() as f64 / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::estimate_var_log_pdf;

    #[test]
    fn standard_normal_score() {
        let t = standard_normal_target(1);
        assert_eq!(t.score(&[2.0]), vec![-2.0]);
    }

    #[test]
    fn sigma_is_precision() {
        let t = make_gaussian(vec![0.0, 0.0], SpdMatrix::diag(&[1.0, 4.0]).unwrap()).unwrap();
        let sigma = t.sigma().unwrap();
        assert!((sigma.entries()[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((sigma.entries()[(1, 1)] - 0.25).abs() < 1e-12);
        assert!(sigma.entries()[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn var_log_pdf_is_half_k_and_matches_mc() {
        let t = standard_normal_target(1);
        assert_eq!(t.var_log_pdf(), Some(0.5));
        let mut rng = RngStream::new(211, 0);
        let (var, se) = estimate_var_log_pdf(&t, 200_000, &mut rng).unwrap();
        assert!((var - 0.5).abs() <= 5.0 * se, "var {var} se {se}");
    }

    #[test]
    fn log_pdf_is_normalized() {
        // integrate the 1-d standard normal density over a wide grid
        let t = standard_normal_target(1);
        let mut sum = 0.0;
        let h = 1e-3;
        let mut x = -12.0;
        while x < 12.0 {
            sum += t.log_pdf(&[x]).exp() * h;
            x += h;
        }
        assert!((sum - 1.0).abs() < 1e-6, "mass {sum}");
    }

    #[test]
    fn lipschitz_is_max_precision_eigenvalue() {
        let t = make_gaussian(vec![0.0, 0.0], SpdMatrix::diag(&[1.0, 4.0]).unwrap()).unwrap();
        assert!((t.lipschitz_l().unwrap() - 1.0).abs() < 1e-12);
        let t2 = make_gaussian(vec![0.0, 0.0], SpdMatrix::diag(&[0.25, 4.0]).unwrap()).unwrap();
        assert!((t2.lipschitz_l().unwrap() - 4.0).abs() < 1e-12);
    }
}
