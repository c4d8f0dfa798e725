//! Per-command manifests: which artifacts a command produced, under
//! which effective configuration and master seed. Content hashes make
//! reproducibility checkable with nothing but two manifest files, and
//! manifests carry no timestamps so identical runs serialize to
//! identical bytes.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub master_seed: u64,
    /// Sorted by path; every file the command wrote, manifests excluded.
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").expect("writing to a String cannot fail");
    }
    out
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Manifest file name for a subcommand, e.g. `gen-data` →
/// `gen_data_manifest.json`.
pub fn manifest_name(command: &str) -> String {
    format!("{}_manifest.json", command.replace('-', "_"))
}

/// Hash the named artifacts in `out_dir` and write the command's
/// manifest next to them.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config_sha256: &str,
    master_seed: u64,
    artifact_names: &[&str],
) -> Result<Manifest> {
    let mut artifacts = Vec::with_capacity(artifact_names.len());
    for name in artifact_names {
        artifacts.push(Artifact {
            path: (*name).to_string(),
            sha256: file_sha256(&out_dir.join(name))?,
        });
    }
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        command: command.to_string(),
        config_sha256: config_sha256.to_string(),
        master_seed,
        artifacts,
    };
    write_manifest_file(out_dir, &manifest)?;
    Ok(manifest)
}

pub fn write_manifest_file(out_dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = out_dir.join(manifest_name(&manifest.command));
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_manifest(out_dir: &Path, command: &str) -> Result<Manifest> {
    let path = out_dir.join(manifest_name(command));
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
