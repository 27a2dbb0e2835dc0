use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("solver diverged at iteration {iter}: non-finite values in {variable}")]
    Divergence { iter: usize, variable: &'static str },

    #[error("malformed image {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(expected: impl std::fmt::Debug, actual: impl std::fmt::Debug) -> Self {
        Error::Shape {
            expected: format!("{expected:?}"),
            actual: format!("{actual:?}"),
        }
    }

    /// Short machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateBasis(_) => "degenerate_basis",
            Error::Config(_) => "config",
            Error::Shape { .. } => "shape",
            Error::Divergence { .. } => "divergence",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
