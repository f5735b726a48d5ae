use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {file}: {message}")]
    Malformed { file: String, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("shot {shot_id} lies outside the provider frame ({x}, {y})")]
    OutOfFrame { shot_id: String, x: f64, y: f64 },

    #[error("non-finite feature value in {0}")]
    NonFinite(&'static str),

    #[error("probability at index {index} is {value}, expected a value in [0, 1]")]
    InvalidProbability { index: usize, value: f64 },

    #[error("both classes are required but only {present} was found")]
    SingleClass { present: &'static str },

    #[error("hessian is singular even after ridge boosting")]
    SingularHessian,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("experiment failed: {0}")]
    Experiment(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
