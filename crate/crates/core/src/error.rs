use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(
        "singular system after {components} component(s) (condition estimate {condition:.3e}); \
         {hint}"
    )]
    Singular {
        components: usize,
        condition: f64,
        hint: &'static str,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("state error: {0}")]
    State(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Argument,
    Io,
    Shape,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Argument(_) | Error::Config(_) | Error::State(_) => ErrorClass::Argument,
            Error::Io { .. } | Error::Parse { .. } | Error::Json(_) => ErrorClass::Io,
            Error::Shape(_) | Error::Degenerate(_) => ErrorClass::Shape,
            Error::Singular { .. } | Error::Numerical(_) => ErrorClass::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
