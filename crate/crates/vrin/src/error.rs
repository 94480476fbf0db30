use std::path::PathBuf;

/// Everything a command can fail with, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("data/model mismatch: {0}")]
    Mismatch(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    /// 2 usage/config/IO, 3 data or model mismatch, 4 numeric failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io { .. } | CliError::Format { .. } => 2,
            CliError::Mismatch(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<vrin_core::Error> for CliError {
    fn from(e: vrin_core::Error) -> Self {
        use vrin_core::Error as E;
        match e {
            E::NonFinite { .. } | E::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            E::ShapeMismatch { .. } => CliError::Mismatch(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
