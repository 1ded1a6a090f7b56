//! Run manifests: enough metadata to re-run an experiment and byte-compare
//! its artifacts.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    /// SHA-256 of the canonical (sorted-key) serialization of `config`.
    pub config_hash: String,
    /// The full configuration, inlined so a manifest is self-contained.
    pub config: serde_json::Value,
    /// Effective seed (CLI override already applied).
    pub seed: u64,
    pub code_version: String,
    /// Wall clock of the producing run; informational only, never compared.
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<ArtifactEntry>,
}

impl RunManifest {
    pub fn config_hash_of(config: &serde_json::Value) -> String {
        // serde_json maps sort keys, so this serialization is canonical
        sha256_hex(serde_json::to_string(config).expect("config serializes").as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).context("parsing manifest")
    }
}

/// In-memory artifact produced by a runner.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Artifact {
            name: name.into(),
            bytes,
        }
    }

    pub fn entry(&self) -> ArtifactEntry {
        ArtifactEntry {
            name: self.name.clone(),
            sha256: sha256_hex(&self.bytes),
            bytes: self.bytes.len(),
        }
    }
}

/// Writes artifacts plus the manifest into `out_dir`.
pub fn write_run(
    out_dir: &Path,
    kind: &str,
    config: &serde_json::Value,
    seed: u64,
    wall_clock_seconds: f64,
    artifacts: &[Artifact],
) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    for a in artifacts {
        fs::write(out_dir.join(&a.name), &a.bytes)
            .with_context(|| format!("writing {}", a.name))?;
    }
    let manifest = RunManifest {
        kind: kind.to_string(),
        config_hash: RunManifest::config_hash_of(config),
        config: config.clone(),
        seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds,
        artifacts: artifacts.iter().map(Artifact::entry).collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).context("serializing manifest")?;
    bytes.push(b'\n');
    fs::write(out_dir.join("manifest.json"), bytes).context("writing manifest.json")?;
    Ok(())
}
