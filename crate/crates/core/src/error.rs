use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the engine and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or specification value is outside its legal range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Caller-supplied data is unusable (empty sample, malformed record).
    #[error("invalid input: {0}")]
    Input(String),

    /// Two values that must agree by construction do not.
    #[error("internal error: {0}")]
    Internal(String),

    /// Filesystem failure, annotated with the path involved.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed text in a config or chromosome file.
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
