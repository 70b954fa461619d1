use alloc::string::String;

use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid register configuration: {0}")]
    Config(String),
    #[error("invalid noise configuration: {0}")]
    Noise(String),
    #[error("invalid sequence: {0}")]
    Sequence(String),
    #[error("unknown sweep parameter `{0}`")]
    UnknownSweepParameter(String),
    #[error("unknown level label `{0}`")]
    UnknownLabel(String),
    #[error("no allowed transition {0}")]
    MissingTransition(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// A fit that could not produce a usable estimate.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{reason} (rms residual {rms_residual:.3e} after {iterations} iterations)")]
pub struct FitError {
    pub reason: String,
    pub rms_residual: f64,
    pub iterations: usize,
}

impl FitError {
    pub fn new(reason: impl Into<String>) -> Self {
        Self { reason: reason.into(), rms_residual: f64::NAN, iterations: 0 }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
