//! Error types, one enum per layer.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("cannot normalize a zero (or non-finite) vector")]
    DegenerateDirection,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("Gram system for component {component}, predictor mode {mode} is singular")]
    LinearSolve { component: usize, mode: usize },
    #[error("fit failed after {} iterations: {reason}", .loss_trace.len().saturating_sub(1))]
    Failure { reason: String, loss_trace: Vec<f64> },
    #[error(transparent)]
    Lasso(#[from] LassoError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LassoError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid lasso configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid simulation configuration: {0}")]
    Config(String),
    #[error("coefficients are not stationary: spectral radius {radius} >= 1")]
    NonStationary { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Lasso(#[from] LassoError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid evaluation setup: {0}")]
    Argument(String),
    #[error("fit failed at rolling step {step}: {source}")]
    FitFailedAt {
        step: usize,
        #[source]
        source: FitError,
    },
    #[error("every cross-validation cell failed ({} attempted)", .attempted.len())]
    CvFailure { attempted: Vec<(usize, Option<Vec<usize>>, String)> },
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
