//! Rotated independent product of a 1-d scale family:
//! `pi(x) = prod_i c_i pi_1(c_i e_i' Q x)`.
//!
//! If the base has score variance `sigma1^2`, the score covariance of the
//! product is `sigma1^2 Q' diag(c_i^2) Q`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::rng::RngStream;

use super::{Logistic1d, Target};

const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Clone)]
pub struct RotatedScaleFamily {
    base: Arc<dyn Target>,
    scales: Vec<f64>,
    q: Matrix,
    qt: Matrix,
    sigma: Option<SpdMatrix>,
    gamma: Option<SpdMatrix>,
}

pub fn make_rotated_scale_family(
    base: Arc<dyn Target>,
    scales: Vec<f64>,
    q: Matrix,
) -> Result<RotatedScaleFamily> {
    if base.dim() != 1 {
        return Err(Error::InvalidArgument(format!(
            "scale family base must be one-dimensional, got k={}",
            base.dim()
        )));
    }
    let k = scales.len();
    if !q.is_square() || q.rows() != k {
        return Err(Error::DimensionMismatch(format!(
            "rotation must be {k}x{k}, got {}x{}",
            q.rows(),
            q.cols()
        )));
    }
    if scales.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::InvalidArgument("scales must be positive and finite".into()));
    }
    let qtq = q.transpose().matmul(&q)?;
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((qtq[(i, j)] - want).abs());
        }
    }
    if worst > ORTHOGONALITY_TOL {
        return Err(Error::InvalidArgument(format!(
            "rotation is not orthogonal: max |Q'Q - I| = {worst:.3e}"
        )));
    }

    let conjugate = |diag: &[f64]| -> Result<SpdMatrix> {
        let d = Matrix::diag(diag);
        let m = q.transpose().matmul(&d)?.matmul(&q)?;
        SpdMatrix::new(m.symmetrized())
    };
    let sigma = match base.sigma() {
        Some(s1) => {
            let s1 = s1.entries()[(0, 0)];
            let diag: Vec<f64> = scales.iter().map(|c| s1 * c * c).collect();
            Some(conjugate(&diag)?)
        }
        None => None,
    };
    let gamma = match base.gamma() {
        Some(g1) => {
            let g1 = g1.entries()[(0, 0)];
            let diag: Vec<f64> = scales.iter().map(|c| g1 / (c * c)).collect();
            Some(conjugate(&diag)?)
        }
        None => None,
    };

    Ok(RotatedScaleFamily {
        qt: q.transpose(),
        base,
        scales,
        q,
        sigma,
        gamma,
    })
}

/// Product of k independent standard logistics (scales 1, identity rotation).
pub fn logistic_product(k: usize) -> Result<RotatedScaleFamily> {
    make_rotated_scale_family(Arc::new(Logistic1d), vec![1.0; k], Matrix::identity(k))
}

impl RotatedScaleFamily {
    fn rotated(&self, x: &[f64]) -> Vec<f64> {
        self.q.matvec(x).expect("dimension checked at construction")
    }
}

impl Target for RotatedScaleFamily {
    fn dim(&self) -> usize {
        self.scales.len()
    }

    fn name(&self) -> String {
        format!("rotated-scale-family({}, k={})", self.base.name(), self.dim())
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        let y = self.rotated(x);
        let mut acc = 0.0;
        for (c, yi) in self.scales.iter().zip(&y) {
            acc += c.ln() + self.base.log_pdf(&[c * yi]);
        }
        acc
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        let y = self.rotated(x);
        let s: Vec<f64> = self
            .scales
            .iter()
            .zip(&y)
            .map(|(c, yi)| c * self.base.score(&[c * yi])[0])
            .collect();
        self.qt.matvec(&s).expect("dimension checked")
    }

    fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let y: Vec<f64> = self
            .scales
            .iter()
            .map(|c| self.base.sample(rng)[0] / c)
            .collect();
        self.qt.matvec(&y).expect("dimension checked")
    }

    fn normalized(&self) -> bool {
        self.base.normalized()
    }

    fn hessian(&self, x: &[f64]) -> Option<Matrix> {
        let y = self.rotated(x);
        let mut diag = Vec::with_capacity(self.dim());
        for (c, yi) in self.scales.iter().zip(&y) {
            let h1 = self.base.hessian(&[c * yi])?;
            diag.push(c * c * h1[(0, 0)]);
        }
        let d = Matrix::diag(&diag);
        Some(
            self.qt
                .matmul(&d)
                .and_then(|m| m.matmul(&self.q))
                .expect("dimension checked")
                .symmetrized(),
        )
    }

    fn lipschitz_l(&self) -> Option<f64> {
        let l1 = self.base.lipschitz_l()?;
        let cmax = self.scales.iter().fold(0.0f64, |m, c| m.max(*c));
        Some(l1 * cmax * cmax)
    }

    fn sigma(&self) -> Option<SpdMatrix> {
        self.sigma.clone()
    }

    fn gamma(&self) -> Option<SpdMatrix> {
        self.gamma.clone()
    }

    fn var_log_pdf(&self) -> Option<f64> {
        // independent coordinates: variances of the block log-densities add
        Some(self.dim() as f64 * self.base.var_log_pdf()?)
    }
}
