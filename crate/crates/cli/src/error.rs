use std::io;
use std::path::Path;

use idforge_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn parse(path: &Path, message: impl Into<String>) -> Self {
        CliError::Parse { path: path.display().to_string(), message: message.into() }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 2 parse/config, 3 numerical, 4 layout.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::Numerical(_)) => 3,
            CliError::Core(CoreError::Layout(_)) => 4,
            _ => 2,
        }
    }
}
