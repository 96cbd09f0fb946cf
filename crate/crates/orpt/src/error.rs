use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, OrptError>;

#[derive(Debug, thiserror::Error)]
pub enum OrptError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file at byte {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] orpt_core::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("state mismatch: {0}")]
    StateMismatch(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl OrptError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        OrptError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, offset: u64, message: impl Into<String>) -> Self {
        OrptError::Format {
            path: path.into(),
            offset,
            message: message.into(),
        }
    }

    /// Process exit code: 2 usage, 3 I/O, 4 state mismatch, 5 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            OrptError::Io { .. } | OrptError::Format { .. } | OrptError::Csv(_) => 3,
            OrptError::StateMismatch(_) => 4,
            OrptError::Core(orpt_core::Error::Numeric(_))
            | OrptError::Core(orpt_core::Error::Construction(_)) => 5,
            OrptError::Core(_) | OrptError::Config(_) => 2,
        }
    }
}
