use std::path::PathBuf;

/// Errors raised across the workspace. Variants follow the failure classes
/// the command line maps to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("initialization error: {0}")]
    Init(String),

    #[error("state error: {0}")]
    State(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("training halted at iteration {iteration}: non-finite {term}")]
    NonFinite { term: String, iteration: u64 },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("WAV error: {0}")]
    Wav(#[from] hound::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the caller's files or environment rather
    /// than by a broken invariant.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Wav(_) | Error::Csv(_))
    }
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn data(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}
