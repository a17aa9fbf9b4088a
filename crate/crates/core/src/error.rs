use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VistaError {
    /// Invalid parameter or configuration value.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data that fails validation (shape, length, non-finite values).
    #[error("data error: {0}")]
    Data(String),

    #[error("series shorter than window: {len} points < window size {window}")]
    SeriesTooShort { len: usize, window: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("weight file error in tensor `{tensor}`: {message}")]
    Weights { tensor: String, message: String },

    #[error("bank file error at byte {offset}: {message}")]
    BankFormat { offset: u64, message: String },

    #[error("bank built with different configuration")]
    DigestMismatch,

    /// Metric undefined because only one class is present.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
}

impl VistaError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VistaError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end: 1 for
    /// configuration/usage problems, 2 for data and validation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            VistaError::Config(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = VistaError> = std::result::Result<T, E>;
