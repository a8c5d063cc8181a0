//! File formats, configuration and pipeline driver for the `cca` tool.

pub mod bench;
pub mod config;
pub mod db;
pub mod formats;
pub mod pipeline;
pub mod sources;

use std::io;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("{0}")]
    Format(String),
    #[error("authorisation denied: {0}")]
    Denied(String),
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Error {
        Error::Io { path: path.display().to_string(), source }
    }

    pub fn stage(stage: &'static str, message: impl ToString) -> Error {
        Error::Stage { stage, message: message.to_string() }
    }

    /// 1 usage, 2 stage or file failure, 3 denial.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Denied(_) => 3,
            _ => 2,
        }
    }
}
