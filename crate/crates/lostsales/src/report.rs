//! Fingerprints, atomic file writes, and run manifests shared by the
//! library artifacts and the command-line tools.

use crate::demand::DemandDistribution;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Version stamp embedded in every artifact this crate writes.
pub const ARTIFACT_VERSION: u32 = 1;

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

/// Stable identifier for a (demand, c, h) instance plus free-form context
/// bytes (caps, horizons); used to tie reports to their inputs.
pub fn instance_fingerprint(d: &DemandDistribution, c: f64, h: f64, extra: &[u8]) -> String {
    let mut bytes = d.fingerprint_bytes();
    bytes.extend_from_slice(&c.to_bits().to_le_bytes());
    bytes.extend_from_slice(&h.to_bits().to_le_bytes());
    bytes.extend_from_slice(extra);
    sha256_hex(&bytes)
}

/// Write-then-rename so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = PathBuf::from(path);
    let mut name = path
        .file_name()
        .ok_or_else(|| Error::Artifact(format!("{} has no file name", path.display())))?
        .to_os_string();
    name.push(".tmp");
    tmp.set_file_name(name);
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One produced file, as recorded in a run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Provenance record written next to every CLI artifact set: enough to
/// reproduce the run byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: u32,
    pub command: String,
    pub config_sha256: String,
    pub root_seed: u64,
    pub outputs: Vec<OutputRecord>,
    pub timings_ms: Vec<(String, u64)>,
}

impl RunManifest {
    pub fn new(command: &str, config_sha256: String, root_seed: u64) -> Self {
        RunManifest {
            artifact_version: ARTIFACT_VERSION,
            command: command.to_string(),
            config_sha256,
            root_seed,
            outputs: Vec::new(),
            timings_ms: Vec::new(),
        }
    }

    /// Write `bytes` to `path` atomically and record it.
    pub fn emit(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        atomic_write(path, bytes)?;
        self.outputs.push(OutputRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Artifact(format!("manifest serialization: {e}")))?;
        text.push('\n');
        atomic_write(path, text.as_bytes())
    }
}
