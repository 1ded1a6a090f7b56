//! Block product `Pi_d = pi^{(x) d}`: d independent copies of a base block.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::rng::RngStream;

use super::Target;

#[derive(Clone)]
pub struct BlockProduct {
    base: Arc<dyn Target>,
    d: usize,
}

impl BlockProduct {
    pub fn new(base: Arc<dyn Target>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("block count must be positive".into()));
        }
        Ok(BlockProduct { base, d })
    }

    pub fn base(&self) -> &Arc<dyn Target> {
        &self.base
    }

    pub fn block_count(&self) -> usize {
        self.d
    }

    pub fn block_dim(&self) -> usize {
        self.base.dim()
    }

    fn block_diag(&self, m: &SpdMatrix) -> SpdMatrix {
        let k = self.base.dim();
        let n = k * self.d;
        let mut out = Matrix::zeros(n, n);
        for b in 0..self.d {
            for i in 0..k {
                for j in 0..k {
                    out[(b * k + i, b * k + j)] = m.entries()[(i, j)];
                }
            }
        }
        SpdMatrix::new(out).expect("block diagonal of SPD blocks is SPD")
    }
}

impl Target for BlockProduct {
    fn dim(&self) -> usize {
        self.base.dim() * self.d
    }

    fn name(&self) -> String {
        format!("{}^(x){}", self.base.name(), self.d)
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        let k = self.base.dim();
        x.chunks_exact(k).map(|b| self.base.log_pdf(b)).sum()
    }

    fn score(&self, x: &[f64]) -> Vec<f64> {
        let k = self.base.dim();
        let mut out = Vec::with_capacity(x.len());
        for b in x.chunks_exact(k) {
            out.extend(self.base.score(b));
        }
        out
    }

    fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for _ in 0..self.d {
            out.extend(self.base.sample(rng));
        }
        out
    }

    fn normalized(&self) -> bool {
        self.base.normalized()
    }

    fn hessian(&self, x: &[f64]) -> Option<Matrix> {
        let k = self.base.dim();
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        for (b, chunk) in x.chunks_exact(k).enumerate() {
            let h = self.base.hessian(chunk)?;
            for i in 0..k {
                for j in 0..k {
                    out[(b * k + i, b * k + j)] = h[(i, j)];
                }
            }
        }
        Some(out)
    }

    fn lipschitz_l(&self) -> Option<f64> {
        self.base.lipschitz_l()
    }

    fn sigma(&self) -> Option<SpdMatrix> {
        Some(self.block_diag(&self.base.sigma()?))
    }

    fn gamma(&self) -> Option<SpdMatrix> {
        Some(self.block_diag(&self.base.gamma()?))
    }

    fn var_log_pdf(&self) -> Option<f64> {
        Some(self.d as f64 * self.base.var_log_pdf()?)
    }
}
