use std::path::PathBuf;

use cinetrans_core::Error as CoreError;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitCode {
    Ok = 0,
    Validation = 2,
    Io = 3,
    NotComputable = 4,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("not computable: {0}")]
    NotComputable(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Core(CoreError::Format(_) | CoreError::SizeMismatch { .. }) => ExitCode::Io,
            CliError::Core(CoreError::NotComputable(_)) | CliError::NotComputable(_) => ExitCode::NotComputable,
            CliError::Core(_) | CliError::Usage(_) => ExitCode::Validation,
            CliError::Io { .. } | CliError::Json { .. } | CliError::Parse { .. } => ExitCode::Io,
        }
    }
}
