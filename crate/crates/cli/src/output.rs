//! Output directory bookkeeping: files written by a command are removed
//! again if the command fails before committing.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::CliError;

pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    keep_on_failure: bool,
    committed: bool,
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(shape_metrics::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl Outputs {
    pub fn new(dir: PathBuf, keep_on_failure: bool) -> Self {
        Outputs {
            dir,
            written: Vec::new(),
            keep_on_failure,
            committed: false,
        }
    }

    /// Path for `name` inside the output directory, creating the directory.
    pub fn prepare(&mut self, name: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| io_error(&self.dir, e))?;
        let path = self.dir.join(name);
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.prepare(name)?;
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = serde_json::to_string_pretty(value).expect("output serializes");
        self.write_text(name, &(text + "\n"))
    }

    /// Registers a sidecar written by a library call next to `path`.
    pub fn record_sidecar(&mut self, path: &Path, extension: &str) {
        self.written.push(shape_metrics::io::sidecar_path(path, extension));
    }

    pub fn files(&self) -> Vec<String> {
        self.written
            .iter()
            .map(|p| {
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect()
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed || self.keep_on_failure {
            return;
        }
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool_version: &'a str,
    command: &'a str,
    config_sha256: String,
    config: &'a PipelineConfig,
    wall_time_seconds: f64,
    workers: usize,
    seed: u64,
    outputs: Vec<String>,
}

pub fn config_hash(config: &PipelineConfig) -> String {
    Sha256::digest(config.to_toml().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes `<command>.manifest.json` and keeps every output.
pub fn finish(mut outputs: Outputs, command: &str, config: &PipelineConfig, started: Instant) -> Result<(), CliError> {
    let manifest = RunManifest {
        tool_version: shape_metrics::VERSION,
        command,
        config_sha256: config_hash(config),
        config,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        workers: config.workers(),
        seed: config.seed(),
        outputs: outputs.files(),
    };
    outputs.write_json(&format!("{command}.manifest.json"), &manifest)?;
    outputs.commit();
    Ok(())
}
