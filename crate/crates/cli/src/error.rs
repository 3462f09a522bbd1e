use std::path::{Path, PathBuf};

use drumsense::eval::EvalError;
use drumsense::net::NetError;
use drumsense::pipeline::PipelineError;
use drumsense::record::RecordError;
use drumsense::scene::SceneError;
use drumsense::tab::TabError;
use thiserror::Error;

/// Exit codes: 2 bad input (parse, validation, usage), 3 unplayable tab,
/// 4 file I/O or corrupt files. A failed gradient check exits 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.to_owned(), message: err.to_string() }
    }

    pub fn scene(path: &Path, err: SceneError) -> Self {
        match err {
            SceneError::Io(e) => Self::io(path, e),
            other => CliError::Invalid(format!("{}: {other}", path.display())),
        }
    }

    /// Every record decoding failure is a file problem: truncation, bad
    /// magic and CRC mismatches all mean the bytes on disk are wrong.
    pub fn record(path: &Path, err: RecordError) -> Self {
        Self::io(path, err)
    }

    pub fn net(path: Option<&Path>, err: NetError) -> Self {
        match err {
            NetError::Io(_) | NetError::BadMagic | NetError::Truncated | NetError::Crc { .. } | NetError::Json(_) => {
                Self::io(path.unwrap_or(Path::new("-")), err)
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<TabError> for CliError {
    fn from(err: TabError) -> Self {
        CliError::Invalid(err.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(err: PipelineError) -> Self {
        if err.is_infeasible() {
            return CliError::Infeasible(err.to_string());
        }
        match err {
            PipelineError::Sim(e) => CliError::Infeasible(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(err: EvalError) -> Self {
        match err {
            EvalError::Net(e) => CliError::net(None, e),
            other => CliError::Invalid(other.to_string()),
        }
    }
}
