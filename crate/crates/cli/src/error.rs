//! Failure classification and the process exit codes derived from it.

use std::fmt;

use serde::{Deserialize, Serialize};

/// What went wrong, which fixes the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureKind {
    /// Malformed or out-of-range configuration. Exit code 2.
    Config,
    /// Missing, unreadable or malformed files. Exit code 3.
    Io,
    /// A computation had no valid answer, e.g. empty seeds. Exit code 4.
    Numerical,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Config => 2,
            FailureKind::Io => 3,
            FailureKind::Numerical => 4,
        }
    }
}

/// Which part of a stage raised a library error; decides how ambiguous
/// errors such as invalid input are classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Config,
    Load,
    Compute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: FailureKind,
    /// Stage that failed, e.g. `reconstruct`.
    pub stage: String,
    pub message: String,
}

impl CliError {
    pub fn new(kind: FailureKind, stage: impl Into<String>, message: impl Into<String>) -> Self {
        CliError {
            kind,
            stage: stage.into(),
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(FailureKind::Config, "config", message)
    }

    pub fn io(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(FailureKind::Io, stage, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// Classifies a library error raised in `phase` of `stage`.
    pub fn from_core(stage: &str, phase: Phase, err: polardepth::Error) -> Self {
        use polardepth::Error as E;
        let kind = match (&err, phase) {
            (E::Io(_) | E::Image(_) | E::Format { .. }, _) => FailureKind::Io,
            (E::Degenerate(_) | E::Undefined(_), _) => FailureKind::Numerical,
            (_, Phase::Config) => FailureKind::Config,
            (_, Phase::Load) => FailureKind::Io,
            (_, Phase::Compute) => FailureKind::Numerical,
        };
        Self::new(kind, stage, err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Adapter for `map_err` on library results.
pub fn at(stage: &'static str, phase: Phase) -> impl Fn(polardepth::Error) -> CliError {
    move |e| CliError::from_core(stage, phase, e)
}
