//! Experiment configuration: one flat, human-editable JSON file per run.
//!
//! The schema is strict (unknown fields are rejected, with field paths in
//! the error) and scientific parameters carry no implicit defaults: d, l,
//! and the shaping must be given explicitly or symbolically ("optimal",
//! "identity", "gamma", ...).

use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use rwmlab::linalg::Matrix;
use rwmlab::rng::RngStream;
use rwmlab::targets::{
    estimate_gamma, estimate_sigma, logistic_product, make_gaussian, make_logistic_1d,
    make_rotated_scale_family, standard_normal_target, Target,
};
use rwmlab::tuning::optimal_l;
use rwmlab::SpdMatrix;

/// Stream ids are partitioned by purpose so replica streams never collide
/// with estimation or verification streams.
pub mod streams {
    pub const SAMPLE: u64 = 0;
    pub const DIFFUSE: u64 = 1 << 41;
    pub const ESTIMATE: u64 = 1 << 42;
    pub const VERIFY: u64 = 1 << 43;
    pub const SCAN: u64 = 1 << 44;
    /// Per-grid-point replica blocks for acceptance sweeps.
    pub const SWEEP_BASE: u64 = 1 << 45;
    pub const SWEEP_STRIDE: u64 = 1 << 32;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Tune,
    Sample,
    Diffuse,
    Compare,
    Verify,
    Scan,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Tune => "tune",
            Kind::Sample => "sample",
            Kind::Diffuse => "diffuse",
            Kind::Compare => "compare",
            Kind::Verify => "verify",
            Kind::Scan => "scan",
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetParams {
    pub k: Option<usize>,
    pub mu: Option<Vec<f64>>,
    pub gamma: Option<Vec<Vec<f64>>>,
    pub scales: Option<Vec<f64>>,
    pub rotation: Option<Vec<Vec<f64>>>,
    pub base: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub name: String,
    #[serde(default)]
    pub params: TargetParams,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    /// "identity" | "gamma" | "sigma-inverse" | "estimated"
    Named(String),
    /// Row-major matrix literal.
    Matrix(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum LSpec {
    /// "optimal"
    Named(String),
    Value(f64),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    /// "gaussian-iid" | "gaussian-equicorr" | "gaussian-spiked" | "logistic-product"
    pub family: String,
    pub ks: Vec<usize>,
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub target: TargetSpec,
    pub lambda: Option<LambdaSpec>,
    pub l: Option<LSpec>,
    /// Scaling sweep grid for `sample`.
    pub l_grid: Option<Vec<f64>>,
    pub d: Option<usize>,
    pub r: Option<usize>,
    pub t_horizon: Option<f64>,
    pub dt: Option<f64>,
    pub stride: Option<f64>,
    pub n_replicas: Option<usize>,
    pub n_samples: Option<usize>,
    pub output_dir: Option<String>,
    /// Run the diffusion at standardized speed instead of a scaling l.
    pub standardized: Option<bool>,
    /// "euler" | "tamed-euler"
    pub scheme: Option<String>,
    /// "generator" | "as-displayed"
    pub sde_convention: Option<String>,
    pub threshold_sigmas: Option<f64>,
    /// Lags for `compare` ACFs; defaults to the first few grid points.
    pub lags: Option<Vec<f64>>,
    /// Times for `compare` marginal KS checks; defaults to the horizon.
    pub ks_times: Option<Vec<f64>>,
    pub scan: Option<ScanSpec>,
}

/// Parses and schema-validates a config, reporting the offending field path
/// on error.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| anyhow!("config schema violation at `{}`: {}", e.path(), e.inner()))?;
    Ok(cfg)
}

/// A built target plus the flags the runners need.
pub struct TargetHandle {
    pub target: Arc<dyn Target>,
    /// Whether the exact Gaussian spectral gap theory applies.
    pub gaussian: bool,
}

pub fn build_target(spec: &TargetSpec) -> Result<TargetHandle> {
    let p = &spec.params;
    match spec.name.as_str() {
        "gaussian" => {
            let rows = p
                .gamma
                .as_ref()
                .ok_or_else(|| anyhow!("target `gaussian` needs params.gamma (row-major matrix)"))?;
            let gamma = SpdMatrix::from_rows(rows).context("params.gamma")?;
            let mu = p.mu.clone().unwrap_or_else(|| vec![0.0; gamma.dim()]);
            let target = make_gaussian(mu, gamma).context("building gaussian target")?;
            Ok(TargetHandle {
                target: Arc::new(target),
                gaussian: true,
            })
        }
        "standard-normal" => {
            let k = p.k.ok_or_else(|| anyhow!("target `standard-normal` needs params.k"))?;
            Ok(TargetHandle {
                target: Arc::new(standard_normal_target(k)),
                gaussian: true,
            })
        }
        "logistic" => {
            if p.k.unwrap_or(1) != 1 {
                bail!("target `logistic` is one-dimensional; use `logistic-product` for k > 1");
            }
            Ok(TargetHandle {
                target: Arc::new(make_logistic_1d()),
                gaussian: false,
            })
        }
        "logistic-product" => {
            let k = p.k.ok_or_else(|| anyhow!("target `logistic-product` needs params.k"))?;
            Ok(TargetHandle {
                target: Arc::new(logistic_product(k).context("building logistic product")?),
                gaussian: false,
            })
        }
        "rotated-scale-family" => {
            let base_name = p
                .base
                .as_deref()
                .ok_or_else(|| anyhow!("target `rotated-scale-family` needs params.base"))?;
            let base: Arc<dyn Target> = match base_name {
                "gaussian" | "standard-normal" => Arc::new(standard_normal_target(1)),
                "logistic" => Arc::new(make_logistic_1d()),
                other => bail!("unknown scale-family base `{other}`"),
            };
            let scales = p
                .scales
                .clone()
                .ok_or_else(|| anyhow!("target `rotated-scale-family` needs params.scales"))?;
            let rotation = match &p.rotation {
                Some(rows) => Matrix::from_rows(rows).context("params.rotation")?,
                None => Matrix::identity(scales.len()),
            };
            let gaussian = matches!(base_name, "gaussian" | "standard-normal");
            Ok(TargetHandle {
                target: Arc::new(
                    make_rotated_scale_family(base, scales, rotation)
                        .context("building rotated scale family")?,
                ),
                gaussian,
            })
        }
        other => bail!("unknown target `{other}`"),
    }
}

/// The score and state covariances for a target, taken in closed form when
/// available and estimated otherwise. Estimated matrices come with
/// per-entry standard errors.
pub struct Covariances {
    pub sigma: SpdMatrix,
    pub sigma_se: Option<Matrix>,
    pub gamma: SpdMatrix,
    pub var_log_pdf: Option<f64>,
}

pub fn resolve_covariances(
    target: &Arc<dyn Target>,
    n_samples: Option<usize>,
    seed: u64,
) -> Result<Covariances> {
    let need_n = || {
        n_samples.ok_or_else(|| {
            anyhow!(
                "target {} needs Monte Carlo estimation; set n_samples",
                target.name()
            )
        })
    };
    let (sigma, sigma_se) = match target.sigma() {
        Some(s) => (s, None),
        None => {
            let mut rng = RngStream::new(seed, streams::ESTIMATE);
            let est = estimate_sigma(target.as_ref(), need_n()?, &mut rng)?;
            (est.matrix, Some(est.standard_errors))
        }
    };
    let gamma = match target.gamma() {
        Some(g) => g,
        None => {
            let mut rng = RngStream::new(seed, streams::ESTIMATE + 1);
            estimate_gamma(target.as_ref(), need_n()?, &mut rng)?.matrix
        }
    };
    Ok(Covariances {
        sigma,
        sigma_se,
        gamma,
        var_log_pdf: target.var_log_pdf(),
    })
}

pub fn resolve_lambda(
    spec: &LambdaSpec,
    target: &Arc<dyn Target>,
    cov: &Covariances,
    n_samples: Option<usize>,
    seed: u64,
) -> Result<SpdMatrix> {
    match spec {
        LambdaSpec::Matrix(rows) => SpdMatrix::from_rows(rows).context("lambda matrix literal"),
        LambdaSpec::Named(name) => match name.as_str() {
            "identity" => Ok(SpdMatrix::identity(target.dim())),
            "gamma" => Ok(cov.gamma.clone()),
            "sigma-inverse" => Ok(cov.sigma.inverse()?),
            "estimated" => {
                // estimate the recommended shaping (the state covariance)
                // from fresh draws even when a closed form exists
                let n = n_samples.ok_or_else(|| {
                    anyhow!("lambda = \"estimated\" needs n_samples for the Monte Carlo estimate")
                })?;
                let mut rng = RngStream::new(seed, streams::ESTIMATE + 2);
                Ok(estimate_gamma(target.as_ref(), n, &mut rng)?.matrix)
            }
            other => bail!(
                "unknown lambda spec `{other}` (expected identity, gamma, sigma-inverse, estimated, or a matrix)"
            ),
        },
    }
}

pub fn resolve_l(spec: &LSpec, sigma: &SpdMatrix, lambda: &SpdMatrix) -> Result<f64> {
    match spec {
        LSpec::Value(v) => {
            if !(*v > 0.0) || !v.is_finite() {
                bail!("l must be positive and finite, got {v}");
            }
            Ok(*v)
        }
        LSpec::Named(name) if name == "optimal" => Ok(optimal_l(sigma, lambda)?),
        LSpec::Named(other) => bail!("unknown l spec `{other}` (expected a number or \"optimal\")"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected_with_path() {
        let err = parse_config(r#"{"kind":"tune","seed":1,"target":{"name":"logistic"},"bogus":3}"#)
            .unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn nested_paths_show_up_in_errors() {
        let err = parse_config(
            r#"{"kind":"tune","seed":1,"target":{"name":"logistic","params":{"zzz":1}}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("params"), "{err}");
    }

    #[test]
    fn lambda_spec_parses_both_forms() {
        let cfg = parse_config(
            r#"{"kind":"tune","seed":1,"target":{"name":"standard-normal","params":{"k":2}},
                "lambda":[[1.0,0.0],[0.0,2.0]]}"#,
        )
        .unwrap();
        assert!(matches!(cfg.lambda, Some(LambdaSpec::Matrix(_))));
        let cfg = parse_config(
            r#"{"kind":"tune","seed":1,"target":{"name":"standard-normal","params":{"k":2}},
                "lambda":"identity"}"#,
        )
        .unwrap();
        assert!(matches!(cfg.lambda, Some(LambdaSpec::Named(_))));
    }

    #[test]
    fn builds_the_target_zoo() {
        for (name, json) in [
            ("gaussian", r#"{"name":"gaussian","params":{"gamma":[[2.0,0.0],[0.0,1.0]]}}"#),
            ("standard-normal", r#"{"name":"standard-normal","params":{"k":3}}"#),
            ("logistic", r#"{"name":"logistic"}"#),
            ("logistic-product", r#"{"name":"logistic-product","params":{"k":2}}"#),
            (
                "rotated-scale-family",
                r#"{"name":"rotated-scale-family","params":{"base":"logistic","scales":[1.0,2.0]}}"#,
            ),
        ] {
            let spec: TargetSpec = serde_json::from_str(json).unwrap();
            let handle = build_target(&spec).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(handle.target.dim() >= 1);
        }
    }

    #[test]
    fn optimal_l_resolution() {
        let spec: TargetSpec =
            serde_json::from_str(r#"{"name":"standard-normal","params":{"k":1}}"#).unwrap();
        let handle = build_target(&spec).unwrap();
        let cov = resolve_covariances(&handle.target, None, 1).unwrap();
        let lambda =
            resolve_lambda(&LambdaSpec::Named("identity".into()), &handle.target, &cov, None, 1)
                .unwrap();
        let l = resolve_l(&LSpec::Named("optimal".into()), &cov.sigma, &lambda).unwrap();
        assert!((l - 2.3812).abs() < 1e-3);
        assert!(resolve_l(&LSpec::Value(-1.0), &cov.sigma, &lambda).is_err());
    }
}
