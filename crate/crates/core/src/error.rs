use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{key}`: {constraint}")]
    Config { key: String, constraint: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model kind mismatch: {0}")]
    KindMismatch(String),

    #[error("pool exhausted at round {round}: need {needed} items, {available} left")]
    PoolExhausted {
        round: usize,
        needed: usize,
        available: usize,
    },

    #[error("trial {trial}, scheme `{scheme}`, round {round}: {source}")]
    Trial {
        trial: usize,
        scheme: String,
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            constraint: constraint.into(),
        }
    }

    /// The innermost error, looking through trial context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Trial { source, .. } => source.root(),
            other => other,
        }
    }
}
