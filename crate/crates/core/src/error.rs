use std::path::PathBuf;

/// Errors produced by dataset handling, model training and the benchmark harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("training aborted: {0}")]
    Train(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("{method} needs at least {needed} minority samples, got {got}")]
    TooFewMinority {
        method: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("SMOTENC is not defined for datasets without categorical columns")]
    SmoteNcNoCategoricals,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
