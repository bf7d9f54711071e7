use std::path::PathBuf;

/// Process exit code for a failed numerical computation.
pub const EXIT_NUMERIC: i32 = 1;
/// Process exit code for an unusable configuration.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] qslink_core::Error),
    #[error("need at least {needed} samples, got {found}")]
    InsufficientSamples { needed: usize, found: usize },
    #[error("sampled probability {value} is outside [0, 1] and truncation is off")]
    ProbabilityOutOfRange { value: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io { .. } => EXIT_CONFIG,
            _ => EXIT_NUMERIC,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
