use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: {field}: {message}")]
    ConfigInvalid { field: String, message: String },

    #[error("cannot parse configuration file {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Module {
        context: String,
        #[source]
        source: nck_core::Error,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot serialize report: {0}")]
    Serialize(String),

    #[error("cannot build worker pool: {0}")]
    Threads(String),
}

impl LabError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::ConfigInvalid { field: field.into(), message: message.into() }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::ConfigInvalid { .. } | LabError::ConfigParse { .. } => 2,
            LabError::Module { .. } | LabError::Threads(_) => 3,
            LabError::Io { .. } | LabError::Serialize(_) => 4,
        }
    }
}

/// Attaches context to core errors.
pub trait Context<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T, LabError>;
}

impl<T> Context<T> for nck_core::Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T, LabError> {
        self.map_err(|source| LabError::Module { context: context(), source })
    }
}
