//! Run manifests: every output file references the manifest that produced
//! it, and a manifest plus the same binary reproduces the outputs byte for
//! byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub toolkit_version: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Fully resolved configuration (flags already folded in).
    pub config: Value,
}

impl RunManifest {
    pub fn new(command: &str, config: Value) -> Self {
        RunManifest {
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            config,
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Write next to the primary output as `<stem>.manifest.json` and
    /// return the path.
    pub fn write(&self, primary_output: &Path) -> anyhow::Result<PathBuf> {
        let path = manifest_path(primary_output);
        backscatter_core::io::write_json(&path, self)?;
        Ok(path)
    }
}

pub fn manifest_path(primary_output: &Path) -> PathBuf {
    let stem = primary_output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    primary_output.with_file_name(format!("{stem}.manifest.json"))
}

/// File name (not path) used by sidecars to reference the manifest.
pub fn manifest_name(primary_output: &Path) -> String {
    manifest_path(primary_output)
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run.manifest.json".into())
}
