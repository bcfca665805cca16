use elc_core::io::output::write_json;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Record of one command invocation, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the resolved configuration in canonical TOML form.
    pub config_sha256: String,
    /// Emitted files relative to the output directory, in write order.
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, canonical: &str, dir: &Path, outputs: &[PathBuf], wall_time_s: f64) -> Self {
        let outputs = outputs
            .iter()
            .map(|p| {
                let rel = p.strip_prefix(dir).unwrap_or(p);
                rel.components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect::<Vec<_>>()
                    .join("/")
            })
            .collect();
        RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: config_hash(canonical),
            outputs,
            wall_time_s,
        }
    }

    pub fn write(&self, dir: &Path) -> elc_core::Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}
