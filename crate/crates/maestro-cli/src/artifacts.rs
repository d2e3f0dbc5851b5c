//! On-disk run artifacts: resume checkpoints and the hashed file manifest.
//!
//! Checkpoints carry the complete mutable training state (student, population,
//! buffers, registry, clocks) plus the rng stream and the resolved config, so
//! a resumed run continues bit-identically. The manifest lists every emitted
//! file with its SHA-256; deterministic re-runs reproduce all hashes.

use crate::CliError;
use maestro::curriculum::{LaserTagDomain, MatrixDomain, TrainState};
use maestro::rng::RngHandle;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;

/// Environment family tag stored in every checkpoint.
pub const KIND_LASERTAG: &str = "lasertag";
pub const KIND_MATRIX: &str = "matrix";

#[derive(Serialize, Deserialize)]
pub struct Checkpoint<S> {
    pub version: u32,
    /// `"lasertag"` or `"matrix"`.
    pub kind: String,
    pub method: String,
    pub seed: u64,
    /// Resolved config the run was started with.
    pub config_toml: String,
    pub state: S,
    pub rng: RngHandle,
}

pub type LasertagCheckpoint = Checkpoint<TrainState<LaserTagDomain>>;
pub type MatrixCheckpoint = Checkpoint<TrainState<MatrixDomain>>;

/// Reads just the `kind` tag so callers can pick the right concrete type.
pub fn checkpoint_kind(path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::io_error(path, e))?;
    #[derive(Deserialize)]
    struct Probe {
        version: u32,
        kind: String,
    }
    let probe: Probe = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: not a checkpoint: {e}", path.display())))?;
    if probe.version != CHECKPOINT_VERSION {
        return Err(CliError::Data(format!(
            "{}: checkpoint version {} unsupported (this build reads {CHECKPOINT_VERSION})",
            path.display(),
            probe.version
        )));
    }
    Ok(probe.kind)
}

pub fn load_checkpoint<S: serde::de::DeserializeOwned>(
    path: &Path,
    expect_kind: &str,
) -> Result<Checkpoint<S>, CliError> {
    let kind = checkpoint_kind(path)?;
    if kind != expect_kind {
        return Err(CliError::Data(format!(
            "{}: checkpoint is for the {kind} environment, expected {expect_kind}",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| crate::io_error(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: corrupt checkpoint: {e}", path.display())))
}

/// Writes atomically (temp file + rename) so an interrupted write never
/// clobbers the previous checkpoint.
pub fn save_checkpoint<S: Serialize>(path: &Path, ckpt: &Checkpoint<S>) -> Result<(), CliError> {
    let json = serde_json::to_string(ckpt).map_err(CliError::internal)?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, &json).map_err(|e| crate::io_error(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| crate::io_error(path, e))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    /// Relative file name → SHA-256 of contents.
    pub files: BTreeMap<String, String>,
}

/// Hashes the named files (relative to `dir`) into a manifest and writes it
/// as `manifest.json` in the same directory.
pub fn write_manifest(dir: &Path, files: &[PathBuf]) -> Result<Manifest, CliError> {
    let mut entries = BTreeMap::new();
    for f in files {
        let path = dir.join(f);
        let bytes = std::fs::read(&path).map_err(|e| crate::io_error(&path, e))?;
        entries.insert(f.to_string_lossy().into_owned(), sha256_hex(&bytes));
    }
    let manifest = Manifest { version: MANIFEST_VERSION, files: entries };
    let json = serde_json::to_string_pretty(&manifest).map_err(CliError::internal)?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, json).map_err(|e| crate::io_error(&path, e))?;
    Ok(manifest)
}
