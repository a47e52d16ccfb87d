use std::path::Path;

use thiserror::Error;
use trig_core::pipeline::BenchmarkError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input file or inconsistent flags.
    #[error("{0}")]
    Schema(String),
    /// Sample ids that do not line up across inputs.
    #[error("{0}")]
    IdMismatch(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::IdMismatch(_) => 3,
            CliError::Io(_) | CliError::Runtime(_) => 1,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn bench(path: &Path, err: BenchmarkError) -> Self {
        match err {
            BenchmarkError::Io(e) => CliError::io(path, e),
            other => CliError::Schema(format!("{}: {other}", path.display())),
        }
    }
}

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some samples were skipped; the output covers the rest.
    Partial(usize),
}

impl Outcome {
    pub fn from_skipped(skipped: usize) -> Self {
        if skipped == 0 {
            Outcome::Success
        } else {
            Outcome::Partial(skipped)
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Partial(_) => 4,
        }
    }
}

pub type CliResult = Result<Outcome, CliError>;
