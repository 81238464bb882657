//! Artifact plumbing: output-path resolution, table serialization, and the run
//! manifest that accompanies every output file.

use crate::{Cli, CliError, Format};
use rblab_core::report::Table;
use serde::Serialize;
use serde_json::Value;
use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

pub const OUTPUT_DIR_ENV: &str = "RBLAB_OUTPUT_DIR";

/// Where a command writes: `<base>[.suffix].csv|json` plus `<base>.manifest.json`.
pub struct OutputTarget {
    base: PathBuf,
    format: Format,
}

impl OutputTarget {
    pub fn resolve(cli: &Cli, command_name: &str) -> OutputTarget {
        let base = match &cli.output {
            Some(p) => {
                let mut p = p.clone();
                // A trailing .csv/.json is treated as the base name, not kept twice.
                if matches!(p.extension().and_then(|e| e.to_str()), Some("csv") | Some("json")) {
                    p.set_extension("");
                }
                p
            }
            None => {
                let dir = std::env::var_os(OUTPUT_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."));
                dir.join(command_name)
            }
        };
        OutputTarget { base, format: cli.format }
    }

    fn path_with(&self, suffix: Option<&str>, ext: &str) -> PathBuf {
        let mut name = self
            .base
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".to_string());
        if let Some(s) = suffix {
            name.push('.');
            name.push_str(s);
        }
        name.push('.');
        name.push_str(ext);
        self.base.with_file_name(name)
    }

    pub fn write_table(&self, table: &Table, suffix: Option<&str>) -> Result<PathBuf, CliError> {
        let (path, body) = match self.format {
            Format::Csv => (self.path_with(suffix, "csv"), table.to_csv_string()),
            Format::Json => {
                let mut body = serde_json::to_string_pretty(&table.to_json())
                    .expect("tables always serialize");
                body.push('\n');
                (self.path_with(suffix, "json"), body)
            }
        };
        write_file(&path, body.as_bytes())?;
        Ok(path)
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<PathBuf, CliError> {
        let path = self.path_with(None, "manifest.json");
        let mut body =
            serde_json::to_string_pretty(manifest).expect("manifests always serialize");
        body.push('\n');
        write_file(&path, body.as_bytes())?;
        Ok(path)
    }
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| {
                CliError::Io(format!("cannot create directory {}: {e}", parent.display()))
            })?;
        }
    }
    fs::write(path, bytes)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Reproducibility record written next to every artifact. Timestamps live here and
/// only here, keeping table bodies byte-stable.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub version: String,
    pub started_at_epoch_s: u64,
    pub finished_at_epoch_s: u64,
}

impl RunManifest {
    pub fn start(command: &str, seed: u64, config: Value) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at_epoch_s: now_epoch_s(),
            finished_at_epoch_s: 0,
        }
    }

    pub fn finish(mut self) -> RunManifest {
        self.finished_at_epoch_s = now_epoch_s();
        self
    }
}

fn now_epoch_s() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
