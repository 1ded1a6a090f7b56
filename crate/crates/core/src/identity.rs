//! Monte Carlo and pointwise verification of score identities for
//! grad-log-Lipschitz densities: integration by parts, the score
//! covariance identity, sub-Gaussianity of the score, Gaussian density
//! envelopes, and the Lipschitz certificate itself.
//!
//! Every check is deterministic given the stream it is handed, and each
//! report records the seed/stream so it can be reproduced bit for bit.
//! A corrupted target (score scaled away from the true gradient) must make
//! every check fail; the wrappers for building such negative controls live
//! here too.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::RngStream;
use crate::targets::{hessian_or_fd, Target};

pub const DEFAULT_THRESHOLD_SIGMAS: f64 = 5.0;
/// Absolute slack added to every tolerance so exact checks do not trip on
/// rounding.
pub const ABS_FLOOR: f64 = 1e-9;
/// Fraction of dropped (non-finite) evaluations above which a check fails
/// outright.
const MAX_DROP_FRACTION: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Estimate {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

/// Outcome of one identity check. `estimate` holds the deviation from the
/// identity (its target is zero; one-sided checks report the signed excess
/// over the bound), so `pass` means every component satisfies
/// `deviation <= threshold_sigmas * SE + 1e-9`.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub identity_name: String,
    pub estimate: Estimate,
    pub standard_error: Estimate,
    pub threshold_sigmas: f64,
    pub pass: bool,
    pub n_samples: usize,
    pub dropped: usize,
    pub seed: u64,
    pub stream_id: u64,
}

impl IdentityReport {
    #[allow(clippy::too_many_arguments)]
    fn from_components(
        name: String,
        deviations: Vec<f64>,
        ses: Vec<f64>,
        threshold: f64,
        two_sided: bool,
        n: usize,
        dropped: usize,
        rng: &RngStream,
    ) -> Self {
        let drop_ok = (dropped as f64) <= MAX_DROP_FRACTION * n as f64;
        let pass = drop_ok
            && deviations.iter().zip(&ses).all(|(d, se)| {
                let lim = threshold * se + ABS_FLOOR;
                if two_sided {
                    d.abs() <= lim
                } else {
                    *d <= lim
                }
            });
        let (estimate, standard_error) = if deviations.len() == 1 {
            (Estimate::Scalar(deviations[0]), Estimate::Scalar(ses[0]))
        } else {
            (Estimate::Vector(deviations), Estimate::Vector(ses))
        };
        IdentityReport {
            identity_name: name,
            estimate,
            standard_error,
            threshold_sigmas: threshold,
            pass,
            n_samples: n,
            dropped,
            seed: rng.seed(),
            stream_id: rng.stream_id(),
        }
    }
}

/// A test integrand with an explicit gradient.
pub trait TestFunction: Sync {
    fn name(&self) -> String;
    fn eval(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
}

/// f = 1; reduces integration by parts to `E grad log pi = 0`.
pub struct ConstantOne;

impl TestFunction for ConstantOne {
    fn name(&self) -> String {
        "one".into()
    }
    fn eval(&self, _x: &[f64]) -> f64 {
        1.0
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
}

/// f = x_i.
pub struct Coordinate(pub usize);

impl TestFunction for Coordinate {
    fn name(&self) -> String {
        format!("x{}", self.0)
    }
    fn eval(&self, x: &[f64]) -> f64 {
        x[self.0]
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        g[self.0] = 1.0;
        g
    }
}

/// f = x_i x_j (squares allowed when i = j).
pub struct CoordinateProduct(pub usize, pub usize);

impl TestFunction for CoordinateProduct {
    fn name(&self) -> String {
        format!("x{}*x{}", self.0, self.1)
    }
    fn eval(&self, x: &[f64]) -> f64 {
        x[self.0] * x[self.1]
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        g[self.0] += x[self.1];
        g[self.1] += x[self.0];
        g
    }
}

/// Checks `E f(X) grad log pi(X) = -E grad f(X)` by estimating the
/// componentwise sum `f(X) s(X) + grad f(X)`, which has mean zero under
/// the identity.
pub fn check_ibp(
    target: &dyn Target,
    f: &dyn TestFunction,
    n: usize,
    threshold_sigmas: f64,
    rng: &mut RngStream,
) -> Result<IdentityReport> {
    if n < 100 {
        return Err(Error::InsufficientData(format!("check_ibp needs n >= 100, got {n}")));
    }
    let k = target.dim();
    let mut sum = vec![0.0; k];
    let mut sum2 = vec![0.0; k];
    let mut kept = 0usize;
    let mut dropped = 0usize;
    for _ in 0..n {
        let x = target.sample(rng);
        let s = target.score(&x);
        let fv = f.eval(&x);
        let g = f.grad(&x);
        let w: Vec<f64> = (0..k).map(|i| fv * s[i] + g[i]).collect();
        if w.iter().any(|v| !v.is_finite()) {
            dropped += 1;
            continue;
        }
        kept += 1;
        for i in 0..k {
            sum[i] += w[i];
            sum2[i] += w[i] * w[i];
        }
    }
    let nf = kept.max(1) as f64;
    let mut dev = vec![0.0; k];
    let mut se = vec![0.0; k];
    for i in 0..k {
        dev[i] = sum[i] / nf;
        let var = (sum2[i] / nf - dev[i] * dev[i]).max(0.0);
        se[i] = (var / nf).sqrt();
    }
    Ok(IdentityReport::from_components(
        format!("ibp[f={}] on {}", f.name(), target.name()),
        dev,
        se,
        threshold_sigmas,
        true,
        n,
        dropped,
        rng,
    ))
}

/// Checks `Var(grad log pi(X)) = -E grad^2 log pi(X)` entrywise, using the
/// closed-form Hessian when available and finite differences of the score
/// otherwise.
pub fn check_score_covariance(
    target: &dyn Target,
    n: usize,
    threshold_sigmas: f64,
    rng: &mut RngStream,
) -> Result<IdentityReport> {
    if n < 100 {
        return Err(Error::InsufficientData(format!(
            "check_score_covariance needs n >= 100, got {n}"
        )));
    }
    let k = target.dim();
    let mut mean_s = vec![0.0; k];
    let mut sum_w = Matrix::zeros(k, k);
    let mut sum_w2 = Matrix::zeros(k, k);
    let mut kept = 0usize;
    let mut dropped = 0usize;
    for _ in 0..n {
        let x = target.sample(rng);
        let s = target.score(&x);
        let h = hessian_or_fd(target, &x);
        if s.iter().any(|v| !v.is_finite()) || !h.is_finite() {
            dropped += 1;
            continue;
        }
        kept += 1;
        for i in 0..k {
            mean_s[i] += s[i];
            for j in 0..k {
                let w = s[i] * s[j] + h[(i, j)];
                sum_w[(i, j)] += w;
                sum_w2[(i, j)] += w * w;
            }
        }
    }
    let nf = kept.max(1) as f64;
    for m in mean_s.iter_mut() {
        *m /= nf;
    }
    let mut dev = Vec::with_capacity(k * k);
    let mut se = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let mw = sum_w[(i, j)] / nf;
            // Var(s) + E[H] = E[s s'] - m m' + E[H]
            dev.push(mw - mean_s[i] * mean_s[j]);
            let var = (sum_w2[(i, j)] / nf - mw * mw).max(0.0);
            se.push((var / nf).sqrt());
        }
    }
    Ok(IdentityReport::from_components(
        format!("score-covariance on {}", target.name()),
        dev,
        se,
        threshold_sigmas,
        true,
        n,
        dropped,
        rng,
    ))
}

/// One-sided check of the sub-Gaussian moment bound
/// `E exp(<t, grad log pi(X)>) <= exp(L ||t||^2 / 2)` on a grid of t's with
/// `||t|| <= 1` (empirical MGFs are unreliable further out).
pub fn check_subgaussian(
    target: &dyn Target,
    t_grid: &[Vec<f64>],
    n: usize,
    threshold_sigmas: f64,
    rng: &mut RngStream,
) -> Result<IdentityReport> {
    let l = target.lipschitz_l().ok_or_else(|| {
        Error::InvalidArgument(format!("{} declares no Lipschitz constant", target.name()))
    })?;
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("empty t grid".into()));
    }
    let k = target.dim();
    for t in t_grid {
        if t.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "t has length {} but the target has dimension {k}",
                t.len()
            )));
        }
        let norm: f64 = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "||t|| = {norm} exceeds 1; the MGF estimate would be unreliable"
            )));
        }
    }
    let m = t_grid.len();
    let mut sum = vec![0.0; m];
    let mut sum2 = vec![0.0; m];
    let mut kept = 0usize;
    let mut dropped = 0usize;
    for _ in 0..n {
        let x = target.sample(rng);
        let s = target.score(&x);
        if s.iter().any(|v| !v.is_finite()) {
            dropped += 1;
            continue;
        }
        kept += 1;
        for (j, t) in t_grid.iter().enumerate() {
            let dot: f64 = t.iter().zip(&s).map(|(a, b)| a * b).sum();
            let w = dot.exp();
            sum[j] += w;
            sum2[j] += w * w;
        }
    }
    let nf = kept.max(1) as f64;
    let mut dev = Vec::with_capacity(m);
    let mut se = Vec::with_capacity(m);
    for (j, t) in t_grid.iter().enumerate() {
        let norm2: f64 = t.iter().map(|v| v * v).sum();
        let bound = (l * norm2 / 2.0).exp();
        let mean = sum[j] / nf;
        dev.push(mean - bound);
        let var = (sum2[j] / nf - mean * mean).max(0.0);
        se.push((var / nf).sqrt());
    }
    Ok(IdentityReport::from_components(
        format!("subgaussian-score on {}", target.name()),
        dev,
        se,
        threshold_sigmas,
        false,
        n,
        dropped,
        rng,
    ))
}

/// Pointwise Gaussian envelopes for a normalized density with Lipschitz
/// score: the upper bound
/// `log pi(x) <= (k/2) log(L / 2 pi) - ||s(x)||^2 / (2L)` on grid points,
/// and the tangent lower bound
/// `log pi(x) >= log pi(x0) - (L/2) ||x - x0 - s(x0)/L||^2` on random pairs.
/// Both comparisons are made on the log scale; any violation beyond 1e-9
/// fails. The estimates are exact evaluations, so standard errors are zero.
pub fn check_density_bounds(
    target: &dyn Target,
    x_grid: &[Vec<f64>],
    n_pairs: usize,
    threshold_sigmas: f64,
    rng: &mut RngStream,
) -> Result<IdentityReport> {
    if !target.normalized() {
        return Err(Error::InvalidArgument(format!(
            "{} is not normalized; the density bounds need the true constant",
            target.name()
        )));
    }
    let l = target.lipschitz_l().ok_or_else(|| {
        Error::InvalidArgument(format!("{} declares no Lipschitz constant", target.name()))
    })?;
    let k = target.dim() as f64;
    let log_upper_const = 0.5 * k * (l / (2.0 * std::f64::consts::PI)).ln();

    let upper_violation = |x: &[f64]| -> f64 {
        let s2: f64 = target.score(x).iter().map(|v| v * v).sum();
        target.log_pdf(x) - (log_upper_const - s2 / (2.0 * l))
    };

    let mut worst_upper = f64::NEG_INFINITY;
    for x in x_grid {
        worst_upper = worst_upper.max(upper_violation(x));
    }

    let mut worst_lower = f64::NEG_INFINITY;
    let probe_scales = [1.0, 3.0, 10.0];
    for i in 0..n_pairs {
        let x0 = target.sample(rng);
        // wander away from x0 at several scales so the tails get exercised
        let scale = probe_scales[i % probe_scales.len()];
        let x: Vec<f64> = x0
            .iter()
            .map(|v| v + scale * rng.standard_normal())
            .collect();
        worst_upper = worst_upper.max(upper_violation(&x));

        let s0 = target.score(&x0);
        let mut shifted2 = 0.0;
        for j in 0..x.len() {
            let dv = x[j] - x0[j] - s0[j] / l;
            shifted2 += dv * dv;
        }
        let lower = target.log_pdf(&x0) - 0.5 * l * shifted2;
        worst_lower = worst_lower.max(lower - target.log_pdf(&x));
    }

    let dev = vec![worst_upper.max(0.0), worst_lower.max(0.0)];
    let se = vec![0.0, 0.0];
    Ok(IdentityReport::from_components(
        format!("density-bounds on {}", target.name()),
        dev,
        se,
        threshold_sigmas,
        false,
        x_grid.len() + n_pairs,
        0,
        rng,
    ))
}

/// Samples pairs (a mixture of target draws and wide Gaussian probes) and
/// checks `||s(x) - s(y)|| <= L ||x - y|| (1 + 1e-9)`. Reports the worst
/// signed excess.
pub fn check_lipschitz_score(
    target: &dyn Target,
    n_pairs: usize,
    threshold_sigmas: f64,
    rng: &mut RngStream,
) -> Result<IdentityReport> {
    let l = target.lipschitz_l().ok_or_else(|| {
        Error::InvalidArgument(format!("{} declares no Lipschitz constant", target.name()))
    })?;
    let k = target.dim();
    let mut worst = f64::NEG_INFINITY;
    let draw = |mode: usize, rng: &mut RngStream| -> Vec<f64> {
        if mode == 0 {
            target.sample(rng)
        } else {
            (0..k).map(|_| 5.0 * rng.standard_normal()).collect()
        }
    };
    for i in 0..n_pairs {
        let x = draw(i % 2, rng);
        let y = draw((i / 2) % 2, rng);
        let dx: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dx < 1e-12 {
            continue;
        }
        let sx = target.score(&x);
        let sy = target.score(&y);
        let ds: f64 = sx.iter().zip(&sy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        worst = worst.max(ds - l * dx * (1.0 + 1e-9));
    }
    Ok(IdentityReport::from_components(
        format!("lipschitz-score on {}", target.name()),
        vec![worst.max(0.0)],
        vec![0.0],
        threshold_sigmas,
        false,
        n_pairs,
        0,
        rng,
    ))
}

/// Informational report of low and high polynomial moments of the score
/// norm (`E ||s||^2` and `E ||s||^8`). A Lipschitz score makes all of these
/// finite, so no bound is asserted; the report only fails if evaluations
/// blow up.
pub fn score_moment_report(
    target: &dyn Target,
    n: usize,
    rng: &mut RngStream,
) -> Result<IdentityReport> {
    if n < 100 {
        return Err(Error::InsufficientData(format!(
            "moment estimation needs n >= 100, got {n}"
        )));
    }
    let mut sums = [0.0f64; 2];
    let mut sums2 = [0.0f64; 2];
    let mut kept = 0usize;
    let mut dropped = 0usize;
    for _ in 0..n {
        let x = target.sample(rng);
        let s2: f64 = target.score(&x).iter().map(|v| v * v).sum();
        let s8 = s2 * s2 * s2 * s2;
        if !s8.is_finite() {
            dropped += 1;
            continue;
        }
        kept += 1;
        for (acc, v) in sums.iter_mut().zip([s2, s8]) {
            *acc += v;
        }
        for (acc, v) in sums2.iter_mut().zip([s2, s8]) {
            *acc += v * v;
        }
    }
    let nf = kept.max(1) as f64;
    let est: Vec<f64> = sums.iter().map(|s| s / nf).collect();
    let se: Vec<f64> = sums2
        .iter()
        .zip(&est)
        .map(|(s2, m)| ((s2 / nf - m * m).max(0.0) / nf).sqrt())
        .collect();
    Ok(IdentityReport {
        identity_name: format!("score-moments on {}", target.name()),
        estimate: Estimate::Vector(est),
        standard_error: Estimate::Vector(se),
        threshold_sigmas: DEFAULT_THRESHOLD_SIGMAS,
        pass: (dropped as f64) <= MAX_DROP_FRACTION * n as f64,
        n_samples: n,
        dropped,
        seed: rng.seed(),
        stream_id: rng.stream_id(),
    })
}

/// The standard battery: integration by parts with three test functions,
/// the score covariance identity, the sub-Gaussian bound, the density
/// envelopes (when the target is normalized), the Lipschitz certificate,
/// and the informational score-moment report.
/// Streams are allocated deterministically from `(seed, stream_base)`.
pub fn run_battery(
    target: &dyn Target,
    n: usize,
    threshold_sigmas: f64,
    seed: u64,
    stream_base: u64,
) -> Result<Vec<IdentityReport>> {
    let k = target.dim();
    let mut reports = Vec::new();
    let mut stream = stream_base;
    let mut next_rng = || {
        let r = RngStream::new(seed, stream);
        stream += 1;
        r
    };

    let coord2 = CoordinateProduct(0, if k > 1 { 1 } else { 0 });
    let fns: [&dyn TestFunction; 3] = [&ConstantOne, &Coordinate(0), &coord2];
    for f in fns {
        reports.push(check_ibp(target, f, n, threshold_sigmas, &mut next_rng())?);
    }
    reports.push(check_score_covariance(target, n, threshold_sigmas, &mut next_rng())?);

    if target.lipschitz_l().is_some() {
        let mut grid = vec![unit_direction(k, 0, 0.25), unit_direction(k, 0, 0.5), unit_direction(k, 0, 1.0)];
        if k > 1 {
            let diag: Vec<f64> = vec![1.0 / (k as f64).sqrt(); k];
            grid.push(diag.iter().map(|v| 0.5 * v).collect());
            grid.push(diag);
        }
        reports.push(check_subgaussian(target, &grid, n, threshold_sigmas, &mut next_rng())?);

        let mut rng = next_rng();
        let mut x_grid: Vec<Vec<f64>> = vec![vec![0.0; k]];
        for _ in 0..50 {
            x_grid.push(target.sample(&mut rng));
        }
        if target.normalized() {
            reports.push(check_density_bounds(target, &x_grid, 10_000, threshold_sigmas, &mut rng)?);
        }
        reports.push(check_lipschitz_score(target, 10_000, threshold_sigmas, &mut next_rng())?);
    }
    reports.push(score_moment_report(target, n, &mut next_rng())?);
    Ok(reports)
}

fn unit_direction(k: usize, axis: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[axis] = scale;
    v
}

/// Negative-control wrapper: scales the reported score by a constant while
/// leaving everything else untouched, so the "score" is no longer the
/// gradient of the log-density.
pub struct ScoreScaled {
    inner: Arc<dyn Target>,
    factor: f64,
}

pub fn corrupt_score(inner: Arc<dyn Target>, factor: f64) -> ScoreScaled {
    ScoreScaled { inner, factor }
}

impl Target for ScoreScaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn name(&self) -> String {
        format!("corrupted[{}x]({})", self.factor, self.inner.name())
    }
    fn log_pdf(&self, x: &[f64]) -> f64 {
        self.inner.log_pdf(x)
    }
    fn score(&self, x: &[f64]) -> Vec<f64> {
        self.inner.score(x).into_iter().map(|v| v * self.factor).collect()
    }
    fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        self.inner.sample(rng)
    }
    fn normalized(&self) -> bool {
        self.inner.normalized()
    }
    fn hessian(&self, x: &[f64]) -> Option<Matrix> {
        self.inner.hessian(x)
    }
    fn lipschitz_l(&self) -> Option<f64> {
        self.inner.lipschitz_l()
    }
    fn sigma(&self) -> Option<crate::linalg::SpdMatrix> {
        self.inner.sigma()
    }
    fn gamma(&self) -> Option<crate::linalg::SpdMatrix> {
        self.inner.gamma()
    }
    fn var_log_pdf(&self) -> Option<f64> {
        self.inner.var_log_pdf()
    }
}

/// Negative-control wrapper overriding the declared Lipschitz constant.
pub struct LipschitzOverride {
    inner: Arc<dyn Target>,
    l: f64,
}

pub fn override_lipschitz(inner: Arc<dyn Target>, l: f64) -> LipschitzOverride {
    LipschitzOverride { inner, l }
}

impl Target for LipschitzOverride {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn name(&self) -> String {
        format!("wrong-L[{}]({})", self.l, self.inner.name())
    }
    fn log_pdf(&self, x: &[f64]) -> f64 {
        self.inner.log_pdf(x)
    }
    fn score(&self, x: &[f64]) -> Vec<f64> {
        self.inner.score(x)
    }
    fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        self.inner.sample(rng)
    }
    fn normalized(&self) -> bool {
        self.inner.normalized()
    }
    fn hessian(&self, x: &[f64]) -> Option<Matrix> {
        self.inner.hessian(x)
    }
    fn lipschitz_l(&self) -> Option<f64> {
        Some(self.l)
    }
    fn sigma(&self) -> Option<crate::linalg::SpdMatrix> {
        self.inner.sigma()
    }
    fn gamma(&self) -> Option<crate::linalg::SpdMatrix> {
        self.inner.gamma()
    }
    fn var_log_pdf(&self) -> Option<f64> {
        self.inner.var_log_pdf()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{make_logistic_1d, standard_normal_target};

    #[test]
    fn ibp_constant_function_reduces_to_zero_mean_score() {
        let t = standard_normal_target(2);
        let mut rng = RngStream::new(601, 0);
        let rep = check_ibp(&t, &ConstantOne, 50_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn ibp_coordinate_function_gaussian() {
        // E[x_i (-x)] = -e_i on both sides
        let t = standard_normal_target(2);
        let mut rng = RngStream::new(602, 0);
        let rep = check_ibp(&t, &Coordinate(0), 50_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn score_covariance_constant_hessian() {
        let t = standard_normal_target(2);
        let mut rng = RngStream::new(603, 0);
        let rep = check_score_covariance(&t, 50_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn subgaussian_zero_vector_is_trivially_tight() {
        let t = standard_normal_target(1);
        let mut rng = RngStream::new(604, 0);
        let rep = check_subgaussian(&t, &[vec![0.0]], 1_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
        assert!(rep.pass);
        if let Estimate::Scalar(d) = rep.estimate {
            assert!(d.abs() < 1e-12, "MGF(0) deviation {d}");
        } else {
            panic!("expected scalar");
        }
    }

    #[test]
    fn subgaussian_bound_is_tight_for_standard_normal() {
        // E exp(t (-X)) = exp(t^2/2) meets the bound with equality at L = 1;
        // the one-sided 5-sigma band keeps the check green
        let t = standard_normal_target(1);
        let mut rng = RngStream::new(612, 0);
        let rep =
            check_subgaussian(&t, &[vec![0.5], vec![1.0]], 200_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng)
                .unwrap();
        assert!(rep.pass, "{rep:?}");
        if let Estimate::Vector(dev) = &rep.estimate {
            // deviations hover near zero rather than sitting far below
            assert!(dev.iter().all(|d| d.abs() < 0.05), "{dev:?}");
        } else {
            panic!("expected vector estimate");
        }
    }

    #[test]
    fn subgaussian_rejects_large_t() {
        let t = standard_normal_target(1);
        let mut rng = RngStream::new(605, 0);
        assert!(check_subgaussian(&t, &[vec![1.5]], 1_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng).is_err());
    }

    #[test]
    fn density_bounds_gaussian_equality_at_origin() {
        // pi(0) = (2 pi)^{-1/2} equals the upper bound exactly when L = 1
        let t = standard_normal_target(1);
        let mut rng = RngStream::new(606, 0);
        let rep = check_density_bounds(&t, &[vec![0.0]], 5_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn density_bounds_require_normalization() {
        struct Unnormalized;
        impl Target for Unnormalized {
            fn dim(&self) -> usize {
                1
            }
            fn name(&self) -> String {
                "un".into()
            }
            fn log_pdf(&self, x: &[f64]) -> f64 {
                -0.5 * x[0] * x[0] + 3.0
            }
            fn score(&self, x: &[f64]) -> Vec<f64> {
                vec![-x[0]]
            }
            fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
                vec![rng.standard_normal()]
            }
            fn lipschitz_l(&self) -> Option<f64> {
                Some(1.0)
            }
        }
        let mut rng = RngStream::new(607, 0);
        assert!(matches!(
            check_density_bounds(&Unnormalized, &[vec![0.0]], 10, DEFAULT_THRESHOLD_SIGMAS, &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn lipschitz_check_passes_for_logistic() {
        let t = make_logistic_1d();
        let mut rng = RngStream::new(608, 0);
        let rep = check_lipschitz_score(&t, 10_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn wrong_declared_constant_fails_lipschitz_check() {
        let t = override_lipschitz(Arc::new(make_logistic_1d()), 0.25); // true L is 1/2
        let mut rng = RngStream::new(609, 0);
        let rep = check_lipschitz_score(&t, 10_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn reports_are_bit_reproducible() {
        let t = make_logistic_1d();
        let run = || {
            let mut rng = RngStream::new(610, 4);
            check_ibp(&t, &Coordinate(0), 20_000, DEFAULT_THRESHOLD_SIGMAS, &mut rng).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn battery_runs_and_passes_on_logistic() {
        let t = make_logistic_1d();
        let reports = run_battery(&t, 30_000, DEFAULT_THRESHOLD_SIGMAS, 611, 0).unwrap();
        assert!(reports.len() >= 6);
        for rep in &reports {
            assert!(rep.pass, "{}: {:?}", rep.identity_name, rep.estimate);
        }
    }
}
