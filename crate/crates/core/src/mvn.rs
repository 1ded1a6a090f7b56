//! Multivariate normal sampling and exact Gaussian moment formulas.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::rng::RngStream;

/// Draws `mean + L z` with `z` i.i.d. standard normal, where `L` is a
/// lower-triangular covariance factor.
pub fn sample_mvn(mean: &[f64], cov_chol: &Matrix, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !cov_chol.is_square() || cov_chol.rows() != mean.len() {
        return Err(Error::DimensionMismatch(format!(
            "mean length {} vs factor {}x{}",
            mean.len(),
            cov_chol.rows(),
            cov_chol.cols()
        )));
    }
    let n = mean.len();
    let z: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let mut out = mean.to_vec();
    for i in 0..n {
        // lower-triangular product
        for j in 0..=i {
            out[i] += cov_chol[(i, j)] * z[j];
        }
    }
    Ok(out)
}

/// Centered draw `scale * L z` written into `out`; hot path for the chain
/// engines. Panics on length mismatch.
pub(crate) fn sample_centered_scaled_into(
    cov_chol: &Matrix,
    scale: f64,
    rng: &mut RngStream,
    z_buf: &mut [f64],
    out: &mut [f64],
) {
    let n = out.len();
    debug_assert_eq!(cov_chol.rows(), n);
    debug_assert_eq!(z_buf.len(), n);
    for z in z_buf.iter_mut() {
        *z = rng.standard_normal();
    }
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += cov_chol[(i, j)] * z_buf[j];
        }
        out[i] = scale * acc;
    }
}

/// Exact fourth moment `E ||W||^4` for `W ~ N(0, l^2 Lambda)`:
/// `l^4 (2 ||Lambda||_F^2 + tr(Lambda)^2)`, an Isserlis-theorem identity.
pub fn isserlis_fourth_moment(lambda: &SpdMatrix, l: f64) -> f64 {
    let fro = lambda.entries().frobenius_norm();
    let tr = lambda.trace();
    l.powi(4) * (2.0 * fro * fro + tr * tr)
}
