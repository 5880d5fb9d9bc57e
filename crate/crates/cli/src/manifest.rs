//! Run manifests: what was run, on which bytes, producing which bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "run-manifest/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub command_line: Vec<String>,
    /// SHA-256 of the effective configuration serialized as JSON.
    pub config_hash: String,
    pub inputs: Vec<FileDigest>,
    /// Relative to the output directory.
    pub outputs: Vec<FileDigest>,
    pub versions: BTreeMap<String, String>,
    pub wall_times: BTreeMap<String, f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path, shown: String) -> CliResult<FileDigest> {
    let bytes = fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(FileDigest {
        path: shown,
        sha256: sha256_hex(&bytes),
    })
}

/// Write to a sibling temporary file, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| CliError::output(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::output(path, e))
}

impl RunManifest {
    pub fn new(config: &impl Serialize) -> CliResult<Self> {
        let json = serde_json::to_vec(config).map_err(CliError::usage)?;
        let mut versions = BTreeMap::new();
        versions.insert("ocpdmd".to_string(), ocpdmd::VERSION.to_string());
        versions.insert("ocpdmd-cli".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Ok(Self {
            format: MANIFEST_FORMAT.into(),
            command_line: std::env::args().collect(),
            config_hash: sha256_hex(&json),
            inputs: Vec::new(),
            outputs: Vec::new(),
            versions,
            wall_times: BTreeMap::new(),
        })
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        let d = digest_file(path, path.display().to_string())?;
        self.inputs.push(d);
        Ok(())
    }

    pub fn add_outputs(&mut self, out: &Path, paths: &[PathBuf]) -> CliResult<()> {
        for p in paths {
            let shown = p.strip_prefix(out).unwrap_or(p).display().to_string();
            let d = digest_file(p, shown).map_err(|e| CliError::output(p, e))?;
            self.outputs.push(d);
        }
        Ok(())
    }

    pub fn time(&mut self, key: &str, seconds: f64) {
        self.wall_times.insert(key.to_string(), seconds);
    }

    pub fn write(&self, out: &Path) -> CliResult<PathBuf> {
        let path = out.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::output(&path, e))?;
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
