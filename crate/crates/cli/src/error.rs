use std::path::{Path, PathBuf};

use qar_mass::ErrorCategory;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: qar_mass::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn malformed(path: &Path, message: impl Into<String>) -> Self {
        CliError::Malformed {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub fn core(context: impl Into<String>, source: qar_mass::Error) -> Self {
        CliError::Core {
            context: context.into(),
            source,
        }
    }

    /// The message without the path prefix.
    pub fn detail(&self) -> String {
        match self {
            CliError::Io { source, .. } => source.to_string(),
            CliError::Malformed { message, .. } => message.clone(),
            other => other.to_string(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            CliError::Config(_) => ErrorCategory::Config,
            CliError::Io { .. } => ErrorCategory::Io,
            CliError::Malformed { .. } => ErrorCategory::Data,
            CliError::Core { source, .. } => source.category(),
        }
    }

    /// Process exit status: 2 config, 3 io, 4 data, 5 numeric.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Config => 2,
            ErrorCategory::Io => 3,
            ErrorCategory::Data => 4,
            ErrorCategory::Numeric => 5,
        }
    }
}

pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for qar_mass::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::core(what(), e))
    }
}
