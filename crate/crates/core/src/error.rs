use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the calibration toolkit.
#[derive(Debug, Error)]
pub enum WavecalError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid bounds: {0}")]
    Bounds(String),

    #[error("empty request: {0}")]
    EmptyRequest(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("external model failed (exit {status:?}): {stderr}")]
    ExternalModel {
        status: Option<i32>,
        stderr: String,
    },

    #[error("external model timed out after {0} s")]
    Timeout(u64),

    #[error("model run failed for genotype {genotype:?}: {message}")]
    Run {
        genotype: [f64; 3],
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, WavecalError>;

impl WavecalError {
    /// Process exit code for the CLI: 1 config, 2 input format, 3 model/run.
    pub fn exit_code(&self) -> i32 {
        match self {
            WavecalError::Config(_)
            | WavecalError::Bounds(_)
            | WavecalError::EmptyRequest(_) => 1,
            WavecalError::Shape(_) | WavecalError::Format { .. } | WavecalError::Json(_) => 2,
            WavecalError::ExternalModel { .. }
            | WavecalError::Timeout(_)
            | WavecalError::Run { .. }
            | WavecalError::Io(_) => 3,
        }
    }
}
