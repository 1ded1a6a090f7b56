//! Closed-form tuning rules: optimal proposal scaling, shaping
//! recommendations, exact spectral gaps for Gaussian targets, lag-0
//! autocorrelation slopes, and speed limits.
//!
//! The scaling rule comes from maximizing the universal time-change profile
//! `h~(w) = w^2 Phi(-w)`: the maximizer `w* ~= 1.1906` gives the optimal
//! scaling `l = 2 w* / sqrt(Sigma:Lambda)`, a predicted acceptance rate
//! `2 Phi(-w*) ~= 0.234` independent of the shaping, and a universal
//! acceleration `4 h~(w*) ~= 0.66` over the standardized dynamics. `w*` is
//! solved numerically once at startup and cached; no literature constant is
//! hardcoded in the computation.

use std::sync::Arc;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, min_eigenvalue, Matrix, SpdMatrix};
use crate::rng::RngStream;
use crate::special::{normal_cdf, normal_pdf};
use crate::targets::{estimate_gamma, estimate_sigma, estimate_var_log_pdf, Target};

/// The profile `h~(w) = w^2 Phi(-w)` whose maximizer drives the scaling rule.
pub fn h_tilde(w: f64) -> f64 {
    w * w * normal_cdf(-w)
}

fn h_tilde_prime(w: f64) -> f64 {
    2.0 * w * normal_cdf(-w) - w * w * normal_pdf(w)
}

fn h_tilde_second(w: f64) -> f64 {
    2.0 * normal_cdf(-w) - 4.0 * w * normal_pdf(w) + w.powi(3) * normal_pdf(w)
}

/// One fresh solve without the cache; exists so the solver itself can be
/// timed and cross-checked. Use [`solve_omega_star`] everywhere else.
pub fn solve_omega_star_uncached() -> (f64, f64) {
    // golden-section bracket on [0.5, 2.5], then Newton polish on h~'
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.5f64, 2.5f64);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    for _ in 0..80 {
        if h_tilde(c) > h_tilde(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    let mut w = 0.5 * (a + b);
    for _ in 0..60 {
        let g = h_tilde_prime(w);
        if g.abs() <= 1e-12 {
            break;
        }
        let step = g / h_tilde_second(w);
        w -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    debug_assert!(h_tilde_prime(w).abs() <= 1e-12);
    (w, h_tilde(w))
}

/// Maximizer of `h~` and the attained value, `(w*, h~(w*))`. Deterministic;
/// solved once and cached.
pub fn solve_omega_star() -> (f64, f64) {
    static CACHE: OnceLock<(f64, f64)> = OnceLock::new();
    *CACHE.get_or_init(solve_omega_star_uncached)
}

/// Limiting acceptance rate `a_Lambda(l) = 2 Phi(-l sqrt(Sigma:Lambda)/2)`.
pub fn acceptance_curve(l: f64, sigma: &SpdMatrix, lambda: &SpdMatrix) -> Result<f64> {
    if l < 0.0 || !l.is_finite() {
        return Err(Error::InvalidArgument(format!("need l >= 0, got {l}")));
    }
    let sl = frobenius(sigma.entries(), lambda.entries())?;
    if !(sl > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Sigma:Lambda must be positive, got {sl}"
        )));
    }
    Ok(2.0 * normal_cdf(-l * sl.sqrt() / 2.0))
}

/// Optimal scaling for a fixed shaping: `l = 2 w* / sqrt(Sigma:Lambda)`.
pub fn optimal_l(sigma: &SpdMatrix, lambda: &SpdMatrix) -> Result<f64> {
    let sl = frobenius(sigma.entries(), lambda.entries())?;
    if !(sl > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Sigma:Lambda must be positive, got {sl}"
        )));
    }
    let (omega, _) = solve_omega_star();
    Ok(2.0 * omega / sl.sqrt())
}

/// Exact spectral gap of the standardized block dynamics for a Gaussian
/// target: the smallest eigenvalue of `k Sigma Lambda / (Lambda:Sigma)`.
/// The spectrum of `Sigma Lambda` is computed through the symmetric
/// conjugate `sqrt(Sigma) Lambda sqrt(Sigma)`.
pub fn gaussian_spectral_gap(sigma: &SpdMatrix, lambda: &SpdMatrix) -> Result<f64> {
    if sigma.dim() != lambda.dim() {
        return Err(Error::DimensionMismatch(format!(
            "sigma dim {} vs lambda dim {}",
            sigma.dim(),
            lambda.dim()
        )));
    }
    let k = sigma.dim() as f64;
    let root = sigma.sqrt()?;
    let m = root
        .entries()
        .matmul(lambda.entries())?
        .matmul(root.entries())?
        .symmetrized();
    let lam1 = min_eigenvalue(&m)?;
    let sl = frobenius(sigma.entries(), lambda.entries())?;
    Ok(k * lam1 / sl)
}

/// How much faster the optimally shaped dynamics converge than spherically
/// shaped ones for a Gaussian target: `Tr(Sigma) / (k lambda_1(Sigma))`.
pub fn spherical_slowdown(sigma: &SpdMatrix) -> Result<f64> {
    let k = sigma.dim() as f64;
    Ok(sigma.trace() / (k * sigma.min_eigenvalue()?))
}

/// Lag-0 slope of the stationary autocorrelation of `v'X(t)` under the
/// standardized dynamics: `-k (v' Lambda v) / ((Lambda:Sigma) (v' Gamma v))`.
pub fn linear_acf_slope(
    v: &[f64],
    lambda: &SpdMatrix,
    sigma: &SpdMatrix,
    gamma: &SpdMatrix,
) -> Result<f64> {
    let k = lambda.dim();
    if v.len() != k || sigma.dim() != k || gamma.dim() != k {
        return Err(Error::DimensionMismatch(format!(
            "v length {} vs matrices of dim {k}",
            v.len()
        )));
    }
    let vnorm2: f64 = v.iter().map(|x| x * x).sum();
    if vnorm2 == 0.0 {
        return Err(Error::InvalidArgument("direction v must be nonzero".into()));
    }
    let quad = |m: &SpdMatrix| -> f64 {
        let mv = m.entries().matvec(v).expect("dim checked");
        v.iter().zip(&mv).map(|(a, b)| a * b).sum()
    };
    let sl = frobenius(sigma.entries(), lambda.entries())?;
    Ok(-(k as f64) * quad(lambda) / (sl * quad(gamma)))
}

/// Worst-case (over directions v) magnitude of the lag-0 linear slope:
/// `k lambda_1(Gamma^{-1/2} Lambda Gamma^{-1/2}) / (Lambda:Sigma)`.
pub fn worst_case_linear_slope(
    lambda: &SpdMatrix,
    sigma: &SpdMatrix,
    gamma: &SpdMatrix,
) -> Result<f64> {
    let k = lambda.dim() as f64;
    let g_inv_root = gamma.sqrt()?.inverse()?;
    let m = g_inv_root
        .entries()
        .matmul(lambda.entries())?
        .matmul(g_inv_root.entries())?
        .symmetrized();
    let sl = frobenius(sigma.entries(), lambda.entries())?;
    Ok(k * min_eigenvalue(&m)? / sl)
}

#[derive(Clone, Debug, Serialize)]
pub struct ShapingRecommendation {
    /// The recommended shaping: the state covariance itself.
    pub lambda: SpdMatrix,
    /// Worst-case linear lag-0 slope magnitude achieved by it,
    /// `k / Tr(Gamma^{1/2} Sigma Gamma^{1/2})`.
    pub worst_case_slope: f64,
}

/// Optimal shaping for linear short-run autocorrelations: `Lambda = Gamma`.
pub fn optimal_shaping_linear(sigma: &SpdMatrix, gamma: &SpdMatrix) -> Result<ShapingRecommendation> {
    if sigma.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "sigma dim {} vs gamma dim {}",
            sigma.dim(),
            gamma.dim()
        )));
    }
    let k = sigma.dim() as f64;
    // Tr(G^{1/2} S G^{1/2}) = Tr(G S) = Gamma : Sigma for symmetric inputs
    let gs = frobenius(gamma.entries(), sigma.entries())?;
    Ok(ShapingRecommendation {
        lambda: gamma.clone(),
        worst_case_slope: k / gs,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpeedLimits {
    /// `k / (Gamma:Sigma)`: no shaping makes linear functions decorrelate
    /// faster than this.
    pub linear: f64,
    /// `k / Var(log pi(X))`: the lag-0 rate for the log-density, identical
    /// for every shaping.
    pub log_pdf: Option<f64>,
}

pub fn speed_limits_from(
    sigma: &SpdMatrix,
    gamma: &SpdMatrix,
    var_log_pdf: Option<f64>,
) -> Result<SpeedLimits> {
    let k = sigma.dim() as f64;
    let gs = frobenius(gamma.entries(), sigma.entries())?;
    if !(gs > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Gamma:Sigma must be positive, got {gs}"
        )));
    }
    Ok(SpeedLimits {
        linear: k / gs,
        log_pdf: var_log_pdf.map(|v| k / v),
    })
}

/// Speed limits from a target's closed-form covariances.
pub fn speed_limits(target: &dyn Target) -> Result<SpeedLimits> {
    let sigma = target.sigma().ok_or_else(|| {
        Error::InvalidArgument(format!("{} has no closed-form score covariance", target.name()))
    })?;
    let gamma = target.gamma().ok_or_else(|| {
        Error::InvalidArgument(format!("{} has no closed-form state covariance", target.name()))
    })?;
    speed_limits_from(&sigma, &gamma, target.var_log_pdf())
}

/// A full tuning report for one (target, shaping) pair.
#[derive(Clone, Debug, Serialize)]
pub struct TuningReport {
    pub omega_star: f64,
    pub h_tilde_star: f64,
    /// Frobenius product Sigma:Lambda the scaling rule is built on.
    pub sigma_lambda: f64,
    /// Delta-method standard error of Sigma:Lambda when Sigma was estimated.
    pub sigma_lambda_se: Option<f64>,
    pub l_opt: f64,
    pub l_opt_se: Option<f64>,
    pub predicted_acceptance: f64,
    /// Universal acceleration over the standardized dynamics, 4 h~(w*).
    pub acceleration: f64,
    pub lambda_recommended: SpdMatrix,
    /// Worst-case linear slope magnitude under the recommended shaping.
    pub recommended_worst_case_slope: f64,
    pub speed_limit_linear: f64,
    pub speed_limit_logpi: Option<f64>,
    /// Exact spectral gap under the *current* shaping (Gaussian targets).
    pub spectral_gap_exact: Option<f64>,
    pub spherical_slowdown: f64,
}

pub struct TuneInputs<'a> {
    pub sigma: &'a SpdMatrix,
    pub gamma: &'a SpdMatrix,
    pub lambda: &'a SpdMatrix,
    pub var_log_pdf: Option<f64>,
    /// Whether the exact Gaussian spectral gap applies.
    pub gaussian_target: bool,
    /// Per-entry standard errors of an estimated Sigma.
    pub sigma_se: Option<&'a Matrix>,
}

pub fn tune_report(inputs: TuneInputs<'_>) -> Result<TuningReport> {
    let (omega, h_star) = solve_omega_star();
    let sl = frobenius(inputs.sigma.entries(), inputs.lambda.entries())?;
    if !(sl > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Sigma:Lambda must be positive, got {sl}"
        )));
    }
    // first-order propagation of independent per-entry errors through the
    // Frobenius product, then through l = 2 w* s^{-1/2}
    let sigma_lambda_se = inputs.sigma_se.map(|se| {
        let mut acc = 0.0;
        for i in 0..inputs.lambda.dim() {
            for j in 0..inputs.lambda.dim() {
                let term = inputs.lambda.entries()[(i, j)] * se[(i, j)];
                acc += term * term;
            }
        }
        acc.sqrt()
    });
    let l_opt = 2.0 * omega / sl.sqrt();
    let l_opt_se = sigma_lambda_se.map(|s| l_opt * s / (2.0 * sl));
    let shaping = optimal_shaping_linear(inputs.sigma, inputs.gamma)?;
    let limits = speed_limits_from(inputs.sigma, inputs.gamma, inputs.var_log_pdf)?;
    let report = TuningReport {
        omega_star: omega,
        h_tilde_star: h_star,
        sigma_lambda: sl,
        sigma_lambda_se,
        l_opt,
        l_opt_se,
        predicted_acceptance: 2.0 * normal_cdf(-omega),
        acceleration: 4.0 * h_star,
        lambda_recommended: shaping.lambda,
        recommended_worst_case_slope: shaping.worst_case_slope,
        speed_limit_linear: limits.linear,
        speed_limit_logpi: limits.log_pdf,
        spectral_gap_exact: if inputs.gaussian_target {
            Some(gaussian_spectral_gap(inputs.sigma, inputs.lambda)?)
        } else {
            None
        },
        spherical_slowdown: spherical_slowdown(inputs.sigma)?,
    };
    debug_assert!(report.predicted_acceptance > 0.0 && report.predicted_acceptance < 1.0);
    debug_assert!(report.l_opt > 0.0 && report.acceleration > 0.0);
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthVerdict {
    Bounded,
    Growing,
}

#[derive(Clone, Debug, Serialize)]
pub struct HdScanRow {
    pub k: usize,
    /// `(Gamma:Sigma) / k`
    pub gamma_sigma_over_k: f64,
    /// `Var(log pi) / k`
    pub var_log_pdf_over_k: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HdScan {
    pub rows: Vec<HdScanRow>,
    pub linear_slope: f64,
    pub linear_verdict: GrowthVerdict,
    pub log_slope: Option<f64>,
    pub log_verdict: Option<GrowthVerdict>,
}

/// Threshold on the log-log regression slope separating bounded from
/// growing ratios.
pub const GROWTH_SLOPE_THRESHOLD: f64 = 0.1;

/// Least-squares slope of `log(ratio)` against `log(k)` and the verdict it
/// implies.
pub fn growth_verdict(ks: &[f64], ratios: &[f64]) -> Result<(f64, GrowthVerdict)> {
    if ks.len() != ratios.len() || ks.len() < 2 {
        return Err(Error::InsufficientData(
            "growth verdict needs at least two family members".into(),
        ));
    }
    let xs: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let ys: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    let slope = num / den;
    let verdict = if slope > GROWTH_SLOPE_THRESHOLD {
        GrowthVerdict::Growing
    } else {
        GrowthVerdict::Bounded
    };
    Ok((slope, verdict))
}

/// Scans a family of targets over increasing k, reporting how the two speed
/// limit ratios scale. Closed-form covariances are used when present, Monte
/// Carlo estimates otherwise.
pub fn hd_dependence_scan(
    family: &[Arc<dyn Target>],
    n_est: usize,
    seed: u64,
) -> Result<HdScan> {
    if family.len() < 2 {
        return Err(Error::InsufficientData(
            "scan needs at least two family members".into(),
        ));
    }
    let mut rows = Vec::with_capacity(family.len());
    for (i, target) in family.iter().enumerate() {
        let k = target.dim();
        let mut rng = RngStream::new(seed, i as u64);
        let sigma = match target.sigma() {
            Some(s) => s,
            None => estimate_sigma(target.as_ref(), n_est, &mut rng)?.matrix,
        };
        let gamma = match target.gamma() {
            Some(g) => g,
            None => estimate_gamma(target.as_ref(), n_est, &mut rng)?.matrix,
        };
        let var_log = match target.var_log_pdf() {
            Some(v) => Some(v),
            None => Some(estimate_var_log_pdf(target.as_ref(), n_est, &mut rng)?.0),
        };
        let gs = frobenius(gamma.entries(), sigma.entries())?;
        rows.push(HdScanRow {
            k,
            gamma_sigma_over_k: gs / k as f64,
            var_log_pdf_over_k: var_log.map(|v| v / k as f64),
        });
    }
    let ks: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let linear: Vec<f64> = rows.iter().map(|r| r.gamma_sigma_over_k).collect();
    let (linear_slope, linear_verdict) = growth_verdict(&ks, &linear)?;
    let logs: Option<Vec<f64>> = rows.iter().map(|r| r.var_log_pdf_over_k).collect();
    let (log_slope, log_verdict) = match logs {
        Some(v) => {
            let (s, verdict) = growth_verdict(&ks, &v)?;
            (Some(s), Some(verdict))
        }
        None => (None, None),
    };
    Ok(HdScan {
        rows,
        linear_slope,
        linear_verdict,
        log_slope,
        log_verdict,
    })
}
