use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: Vec<u8> },

    #[error("malformed container: {0}")]
    Format(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("run directory {0} already exists; pass --force to overwrite it")]
    RunExists(PathBuf),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
