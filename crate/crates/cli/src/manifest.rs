//! Run manifests: a JSON record written next to each command's output
//! before heavy work starts, carrying everything needed to reproduce the
//! run with this tool version.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::errors::CliError;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Final values after merging defaults, config file, and flags.
    pub config: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub started_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        RunManifest {
            tool: "emgcnn".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: BTreeMap::new(),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.config.insert(key.into(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// Write as `run.json` inside `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), CliError> {
        self.write(&dir.join("run.json"))
    }

    /// Write next to an output file: `<stem>.run.json`.
    pub fn write_beside(&self, file: &Path) -> Result<(), CliError> {
        let stem = file
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("output");
        let path = file.with_file_name(format!("{stem}.run.json"));
        self.write(&path)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Data(format!("manifest: {e}")))?;
        std::fs::write(path, json + "\n")
            .map_err(|e| CliError::Data(format!("manifest {}: {e}", path.display())))?;
        Ok(())
    }
}
