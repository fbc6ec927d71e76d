//! Run manifests: what ran, with which resolved configuration, what it read
//! and wrote, and how it ended.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{CliError, CliResult, FailureKind};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: FailureKind,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Passing a manifest back as `--config` to the same command replays the
/// run; `config` is absent only when configuration itself failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub status: Status,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub timings: Vec<StageTiming>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Config>,
}

/// Bookkeeping of one invocation. Every file read or written goes through
/// it, so the manifest lists all of them even when a stage fails midway.
#[derive(Debug)]
pub struct Run {
    pub command: String,
    pub out: PathBuf,
    pub config: Option<Config>,
    pub threads: usize,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    timings: Vec<StageTiming>,
}

impl Run {
    pub fn new(command: &str, out: &Path) -> Self {
        Run {
            command: command.to_string(),
            out: out.to_path_buf(),
            config: None,
            threads: 0,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
        }
    }

    /// Records `path` as read and returns it.
    pub fn input(&mut self, path: PathBuf) -> PathBuf {
        if !self.inputs.contains(&path) {
            self.inputs.push(path.clone());
        }
        path
    }

    /// Records `path` as written and returns it.
    pub fn output(&mut self, path: PathBuf) -> PathBuf {
        if !self.outputs.contains(&path) {
            self.outputs.push(path.clone());
        }
        path
    }

    /// Runs `f` as a named stage and records its wall-clock time whether or
    /// not it succeeds.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Run) -> CliResult<T>) -> CliResult<T> {
        let start = Instant::now();
        let result = f(self);
        self.timings.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        result
    }

    pub fn manifest(&self, result: &CliResult<()>) -> RunManifest {
        let error = result.as_ref().err().map(|e| ErrorRecord {
            kind: e.kind,
            stage: e.stage.clone(),
            message: e.message.clone(),
        });
        let manifest_path = self.out.join(MANIFEST_FILE);
        let mut outputs = self.outputs.clone();
        if !outputs.contains(&manifest_path) {
            outputs.push(manifest_path);
        }
        RunManifest {
            command: self.command.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            status: if error.is_some() { Status::Failed } else { Status::Ok },
            exit_code: result.as_ref().err().map_or(0, CliError::exit_code),
            error,
            rng_seed: self.config.as_ref().map(|c| c.render.seed),
            threads: self.threads,
            inputs: self.inputs.clone(),
            outputs,
            timings: self.timings.clone(),
            config: self.config.clone(),
        }
    }

    /// Writes `<out>/manifest.toml`, creating `out` if needed.
    pub fn write_manifest(&self, result: &CliResult<()>) -> CliResult<PathBuf> {
        let manifest = self.manifest(result);
        let text = crate::config::to_toml(&manifest)?;
        let io = |e: std::io::Error| CliError::io("manifest", format!("{}: {e}", self.out.display()));
        fs::create_dir_all(&self.out).map_err(io)?;
        let path = self.out.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(io)?;
        Ok(path)
    }
}
