use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Flat `key=value` record written next to every output set. It holds no
/// timestamps, so reruns with identical inputs are byte-identical.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: &'static str,
    pub seed: u64,
    /// Resolved configuration in a fixed order; output paths are excluded.
    pub config: Vec<(String, String)>,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &'static str, seed: u64) -> Self {
        Self {
            command,
            seed,
            config: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    /// SHA-256 of the command, seed and configuration lines.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("command={}\nseed={}\n", self.command, self.seed));
        for (k, v) in &self.config {
            h.update(format!("{k}={v}\n"));
        }
        hex::encode(h.finalize())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command={}", self.command);
        let _ = writeln!(out, "tool_version={}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "config_hash={}", self.config_hash());
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{k}={v}");
        }
        let _ = writeln!(out, "artifact_paths={}", self.artifacts.join(","));
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.render()).map_err(|e| CliError::io(path, e))
    }
}
