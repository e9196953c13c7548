use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two derivations of the same input symbol disagree, or an equation
    /// reduced to `0 = nonzero`.
    #[error("data corruption: {0}")]
    DataCorruption(String),

    /// Encoder and decoder views are out of sync.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("malformed feedback message: {0}")]
    Malformed(String),

    #[error("cannot encode feedback message: {0}")]
    Encoding(String),

    #[error("singular model: {0}")]
    SingularModel(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("transmission cap of {cap} reached before all receivers decoded")]
    CapExceeded { cap: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
