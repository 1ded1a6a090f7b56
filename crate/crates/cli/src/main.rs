//! `rwmlab` command line: declarative experiments over the rwmlab library.
//!
//! Exit codes: 0 success, 1 usage error (bad config, missing files),
//! 2 verification failure (failed identity checks, failed comparisons, or a
//! reproduction mismatch).

mod config;
mod manifest;
mod runner;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::Kind;
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "rwmlab", version, about = "Random walk Metropolis scaling/shaping laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form tuning report for a target/shaping pair.
    Tune(RunArgs),
    /// Run the random walk Metropolis chain and record paths.
    Sample(RunArgs),
    /// Integrate the limiting diffusion and record paths.
    Diffuse(RunArgs),
    /// Run both engines and compare paths against each other and theory.
    Compare(RunArgs),
    /// Monte Carlo verification of the score identities.
    Verify(RunArgs),
    /// Speed-limit scaling scan over a family of targets.
    Scan(RunArgs),
    /// Re-run a manifest and byte-compare the artifacts.
    Reproduce {
        /// Path to a manifest.json produced by an earlier run.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Tune(args) => run(Kind::Tune, args),
        Cmd::Sample(args) => run(Kind::Sample, args),
        Cmd::Diffuse(args) => run(Kind::Diffuse, args),
        Cmd::Compare(args) => run(Kind::Compare, args),
        Cmd::Verify(args) => run(Kind::Verify, args),
        Cmd::Scan(args) => run(Kind::Scan, args),
        Cmd::Reproduce { manifest, threads } => reproduce(&manifest, threads),
    }
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => job(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building thread pool")?;
            pool.install(job)
        }
    }
}

fn run(kind: Kind, args: RunArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let cfg = config::parse_config(&text)?;
    if cfg.kind != kind {
        bail!(
            "config kind `{}` does not match subcommand `{}`",
            cfg.kind.as_str(),
            kind.as_str()
        );
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    let out_dir = match (&args.out, &cfg.output_dir) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => bail!("no output directory: set `output_dir` in the config or pass --out"),
    };

    let started = Instant::now();
    let outcome = with_pool(args.threads, || runner::execute(&cfg, seed))?;
    let wall = started.elapsed().as_secs_f64();

    let config_value: serde_json::Value =
        serde_json::from_str(&text).context("re-reading config for the manifest")?;
    manifest::write_run(&out_dir, kind.as_str(), &config_value, seed, wall, &outcome.artifacts)?;

    println!("{}", outcome.summary.trim_end());
    println!("artifacts written to {}", out_dir.display());
    Ok(if outcome.verification_failed {
        println!("verification FAILED");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn reproduce(manifest_path: &Path, threads: Option<usize>) -> Result<ExitCode> {
    let manifest = RunManifest::load(manifest_path)?;
    let dir = manifest_path
        .parent()
        .ok_or_else(|| anyhow!("manifest has no parent directory"))?;

    let cfg: config::ExperimentConfig = {
        let de = manifest.config.clone();
        serde_path_to_error::deserialize(de)
            .map_err(|e| anyhow!("manifest config invalid at `{}`: {}", e.path(), e.inner()))?
    };
    let outcome = with_pool(threads, || runner::execute(&cfg, manifest.seed))?;

    let mut mismatches = Vec::new();
    let mut compared = 0usize;
    for artifact in &outcome.artifacts {
        let Some(entry) = manifest.artifacts.iter().find(|e| e.name == artifact.name) else {
            mismatches.push(format!("{}: missing from manifest", artifact.name));
            continue;
        };
        let on_disk = fs::read(dir.join(&artifact.name))
            .with_context(|| format!("reading original artifact {}", artifact.name))?;
        if on_disk != artifact.bytes {
            mismatches.push(format!("{}: bytes differ from the original run", artifact.name));
        } else if entry.sha256 != manifest::sha256_hex(&artifact.bytes) {
            mismatches.push(format!("{}: manifest hash does not match content", artifact.name));
        }
        compared += 1;
    }
    for entry in &manifest.artifacts {
        if !outcome.artifacts.iter().any(|a| a.name == entry.name) {
            mismatches.push(format!("{}: not produced by the re-run", entry.name));
        }
    }

    if mismatches.is_empty() {
        println!("reproduced {compared} artifacts byte-for-byte");
        Ok(ExitCode::SUCCESS)
    } else {
        for m in &mismatches {
            println!("mismatch: {m}");
        }
        Ok(ExitCode::from(2))
    }
}
