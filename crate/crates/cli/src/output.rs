//! Output directory writer and reproduction manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seeds: &'a [u64],
    pub config_sha256: String,
    pub config: &'a ExperimentConfig,
    pub outputs: &'a [OutputFile],
}

/// Every file goes through here so the manifest can list it.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", parent.display())))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        self.files.retain(|f| f.path != rel);
        self.files.push(OutputFile { path: rel.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Writes `manifest.json`; call last.
    pub fn finish(mut self, command: &str, seeds: &[u64], config: &ExperimentConfig) -> Result<PathBuf, CliError> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let config_json = serde_json::to_vec(config).map_err(CliError::runtime)?;
        let manifest = Manifest {
            tool: "emumuscle",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seeds,
            config_sha256: sha256_hex(&config_json),
            config,
            outputs: &self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(CliError::runtime)?;
        text.push('\n');
        let path = self.root.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}
