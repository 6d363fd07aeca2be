use std::path::PathBuf;

use tcpr_core::{BenchError, EvalError, FitError, FormatError, LassoError, ModelError, SimError, TensorError};

/// Everything a command can fail with, mapped onto the exit-code contract:
/// 2 usage, 3 I/O, 4 non-convergence, 5 model error.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    BadInput { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("no convergence after {iterations} iterations (estimate written to {})", .written.display())]
    NotConverged { iterations: usize, written: PathBuf },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Lasso(#[from] LassoError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::BadInput { .. } => 2,
            CliError::Fit(FitError::Config(_)) => 2,
            CliError::Sim(SimError::Config(_)) => 2,
            CliError::Eval(EvalError::Argument(_)) => 2,
            CliError::Io { .. } | CliError::Format(_) => 3,
            CliError::Eval(EvalError::Format(_)) => 3,
            CliError::NotConverged { .. } => 4,
            _ => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
