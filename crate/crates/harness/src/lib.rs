//! Experiment engine, file formats and command line for `smoothtrim`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod experiment;
pub mod output;
pub mod seeds;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] smoothtrim::Error),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid experiment: {0}")]
    Spec(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl HarnessError {
    /// Process exit code: 1 for I/O trouble, 2 for anything about the
    /// configuration itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } | HarnessError::Csv { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
