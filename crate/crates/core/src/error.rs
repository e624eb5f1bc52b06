//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter values (non-positive lengths, empty targets, ...).
    #[error("parameter error: {0}")]
    Parameter(String),
    /// Mathematical domain violations (e.g. K0 at x ≤ 0).
    #[error("domain error: {0}")]
    Domain(String),
    /// Incompatible grid/matrix shapes.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// Real-space sampling too coarse for the requested wave-vector content.
    #[error("resolution error: {0}")]
    Resolution(String),
    /// Numerical failures (eigensolver divergence, degenerate systems, ...).
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Malformed input files.
    #[error("ingestion error: {0}")]
    Ingestion(String),
    /// Missing or inconsistent configuration.
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
    pub fn resolution(msg: impl Into<String>) -> Self {
        Error::Resolution(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn ingestion(msg: impl Into<String>) -> Self {
        Error::Ingestion(msg.into())
    }
    pub fn configuration(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
