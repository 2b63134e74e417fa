use std::path::PathBuf;

/// Errors surfaced by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or configuration value violates its stated range.
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation was called on inputs outside its domain (empty sets,
    /// mismatched dimensions, ...).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A file was readable but its content is malformed.
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
