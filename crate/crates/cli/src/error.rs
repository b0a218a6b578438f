use std::path::PathBuf;

use hinf_core::analysis::AnalysisError;
use thiserror::Error;

/// Process exit statuses. Stable; scripts may rely on them.
pub mod exit {
    pub const OK: i32 = 0;
    /// Infeasible certificate, divergence or any other runtime failure.
    pub const FAILURE: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const PRECONDITION: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}:{column}: {message}")]
    Syntax { file: PathBuf, line: usize, column: usize, message: String },
    #[error("{file}: field `{field}`: {message}")]
    Invalid { file: PathBuf, field: String, message: String },
    #[error("{0}")]
    Precondition(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Runtime(String),
    #[error("trajectory diverged at t = {time}; partial trace kept in {dir}")]
    Diverged { time: f64, dir: PathBuf },
    #[error("run directory {0} has no manifest.json")]
    MissingManifest(PathBuf),
    #[error("malformed artifact {path}: {message}")]
    Artifact { path: PathBuf, message: String },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Syntax { .. } | Self::Invalid { .. } => exit::PARSE,
            Self::Precondition(_) | Self::MissingManifest(_) => exit::PRECONDITION,
            Self::Analysis(AnalysisError::GraphNotConnected(_)) => exit::PRECONDITION,
            _ => exit::FAILURE,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
