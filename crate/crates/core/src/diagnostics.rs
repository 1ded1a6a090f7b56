//! Statistical comparison of chain paths against diffusion paths and
//! against theory: pooled acceptance rates, ensemble autocorrelation
//! functions with lag-0 slopes, and Kolmogorov-Smirnov marginal distances.
//!
//! The ACF estimator is an across-replica (ensemble) estimator: it needs a
//! stationary start but no mixing estimates, and replica independence gives
//! honest standard errors.

use serde::Serialize;

use crate::chain::ChainPath;
use crate::error::{Error, Result};

/// Minimum replica count for ensemble statistics.
const MIN_REPLICAS: usize = 30;

#[derive(Clone, Debug, Serialize)]
pub struct AcfEstimate {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub n_paths: usize,
}

/// Pooled acceptance rate over a path collection with its binomial
/// standard error.
pub fn empirical_acceptance(paths: &[ChainPath]) -> Result<(f64, f64)> {
    let accepts: u64 = paths.iter().map(|p| p.accept_count).sum();
    let proposals: u64 = paths.iter().map(|p| p.proposal_count).sum();
    if proposals == 0 {
        return Err(Error::InsufficientData("no proposals recorded".into()));
    }
    let p = accepts as f64 / proposals as f64;
    let se = (p * (1.0 - p) / proposals as f64).sqrt();
    Ok((p, se))
}

/// Ensemble autocorrelation of `f(state)` between time 0 and each lag.
/// All paths must share a grid containing every requested lag and must be
/// started from stationarity.
pub fn stationary_acf(
    paths: &[ChainPath],
    f: impl Fn(&[f64]) -> f64,
    lags: &[f64],
) -> Result<AcfEstimate> {
    if paths.len() < MIN_REPLICAS {
        return Err(Error::InsufficientData(format!(
            "ensemble ACF needs at least {MIN_REPLICAS} replicas, got {}",
            paths.len()
        )));
    }
    if lags.is_empty() {
        return Err(Error::InvalidArgument("no lags requested".into()));
    }
    let n = paths.len();
    let nf = n as f64;
    let y0: Vec<f64> = paths
        .iter()
        .map(|p| {
            p.state_at(0.0)
                .map(&f)
                .ok_or_else(|| Error::InvalidArgument("path grid does not contain t = 0".into()))
        })
        .collect::<Result<_>>()?;
    let m0 = y0.iter().sum::<f64>() / nf;
    let v0 = y0.iter().map(|v| (v - m0) * (v - m0)).sum::<f64>() / (nf - 1.0);
    if v0 <= 0.0 {
        return Err(Error::InvalidArgument(
            "f is constant across replicas; the autocorrelation is undefined".into(),
        ));
    }

    let mut values = Vec::with_capacity(lags.len());
    let mut ses = Vec::with_capacity(lags.len());
    for &lag in lags {
        let yt: Vec<f64> = paths
            .iter()
            .map(|p| {
                p.state_at(lag).map(&f).ok_or_else(|| {
                    Error::InvalidArgument(format!("lag {lag} is not on the recording grid"))
                })
            })
            .collect::<Result<_>>()?;
        let mt = yt.iter().sum::<f64>() / nf;
        let vt = yt.iter().map(|v| (v - mt) * (v - mt)).sum::<f64>() / (nf - 1.0);
        if vt <= 0.0 {
            return Err(Error::InvalidArgument(
                "f is constant across replicas at a requested lag".into(),
            ));
        }
        let denom = (v0 * vt).sqrt();
        let z: Vec<f64> = y0
            .iter()
            .zip(&yt)
            .map(|(a, b)| (a - m0) * (b - mt))
            .collect();
        let mz = z.iter().sum::<f64>() / (nf - 1.0);
        let value = mz / denom;
        // replica independence: SE of the mean of the products, scaled by
        // the (held fixed) normalization
        let zm = z.iter().sum::<f64>() / nf;
        let vz = z.iter().map(|v| (v - zm) * (v - zm)).sum::<f64>() / (nf - 1.0);
        let se = (vz / nf).sqrt() / denom;
        values.push(value);
        ses.push(se.max(f64::MIN_POSITIVE));
    }
    Ok(AcfEstimate {
        lags: lags.to_vec(),
        values,
        standard_errors: ses,
        n_paths: n,
    })
}

/// Lag-0 slope of an ACF by weighted least squares through its first `m`
/// points (weights 1/SE^2). Returns the slope and its standard error.
pub fn acf_slope_at_zero(acf: &AcfEstimate, m: usize) -> Result<(f64, f64)> {
    let m = m.min(acf.lags.len());
    if m < 3 {
        return Err(Error::InsufficientData(format!(
            "slope estimation needs at least 3 lags, got {m}"
        )));
    }
    let taus = &acf.lags[..m];
    let vals = &acf.values[..m];
    let ws: Vec<f64> = acf.standard_errors[..m]
        .iter()
        .map(|se| 1.0 / (se * se))
        .collect();
    let wsum: f64 = ws.iter().sum();
    let tbar: f64 = taus.iter().zip(&ws).map(|(t, w)| t * w).sum::<f64>() / wsum;
    let vbar: f64 = vals.iter().zip(&ws).map(|(v, w)| v * w).sum::<f64>() / wsum;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..m {
        num += ws[i] * (taus[i] - tbar) * (vals[i] - vbar);
        den += ws[i] * (taus[i] - tbar) * (taus[i] - tbar);
    }
    if den <= 0.0 {
        return Err(Error::InvalidArgument("degenerate lag design".into()));
    }
    Ok((num / den, (1.0 / den).sqrt()))
}

/// Asymptotic Kolmogorov survival function
/// `Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * x * x).exp();
        if term < 1e-18 {
            break;
        }
        sum += sign * term;
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    // finite-sample correction from Numerical Recipes
    let sn = n_eff.sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

/// One-sample Kolmogorov-Smirnov statistic and asymptotic p-value of
/// `samples` against the CDF `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let u = cdf(*x);
        d = d.max(u - i as f64 / n).max((i + 1) as f64 / n - u);
    }
    Ok((d, ks_pvalue(d, n)))
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("finite samples"));
    ys.sort_by(|p, q| p.partial_cmp(q).expect("finite samples"));
    let (na, nb) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        let fa = i as f64 / na as f64;
        let fb = j as f64 / nb as f64;
        d = d.max((fa - fb).abs());
    }
    let n_eff = (na as f64 * nb as f64) / (na as f64 + nb as f64);
    Ok((d, ks_pvalue(d, n_eff)))
}

/// Two-sample KS distance between the marginals of coordinate `coord` at
/// time `t` across two path collections.
pub fn marginal_distance(
    paths_a: &[ChainPath],
    paths_b: &[ChainPath],
    t: f64,
    coord: usize,
) -> Result<(f64, f64)> {
    const MIN_FOR_KS: usize = 500;
    if paths_a.len() < MIN_FOR_KS || paths_b.len() < MIN_FOR_KS {
        return Err(Error::InsufficientData(format!(
            "marginal distance needs at least {MIN_FOR_KS} replicas per side, got {} and {}",
            paths_a.len(),
            paths_b.len()
        )));
    }
    let extract = |paths: &[ChainPath]| -> Result<Vec<f64>> {
        paths
            .iter()
            .map(|p| {
                p.state_at(t)
                    .and_then(|s| s.get(coord).copied())
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "time {t} / coordinate {coord} not recorded on the path grid"
                        ))
                    })
            })
            .collect()
    };
    let va = extract(paths_a)?;
    let vb = extract(paths_b)?;
    ks_two_sample(&va, &vb)
}

/// One row of a pass/fail comparison table.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub statistic: String,
    pub time: Option<f64>,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn push(&mut self, statistic: impl Into<String>, time: Option<f64>, value: f64, threshold: f64) {
        self.rows.push(ComparisonRow {
            statistic: statistic.into(),
            time,
            value,
            threshold,
            pass: value <= threshold,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Writes an ACF as CSV with columns `lag,value,se`.
pub fn write_acf_csv<W: std::io::Write>(mut w: W, acf: &AcfEstimate) -> std::io::Result<()> {
    writeln!(w, "lag,value,se")?;
    for i in 0..acf.lags.len() {
        writeln!(w, "{},{},{}", acf.lags[i], acf.values[i], acf.standard_errors[i])?;
    }
    Ok(())
}
