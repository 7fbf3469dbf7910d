use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range arguments supplied by the caller.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// The inputs are well formed but the operation's contract is not met
    /// (e.g. undersized shadow seeds).
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// A configured simulator or memory cap would be exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Format(_) | Error::Json(_) => 2,
            Error::Precondition(_) => 3,
            Error::Resource(_) => 4,
            Error::Internal(_) | Error::Io(_) => 1,
        }
    }
}
