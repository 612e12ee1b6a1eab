use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("pair ({i}, {j}) failed: {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Shape(_) => "shape",
            Error::Parameter(_) => "parameter",
            Error::Degenerate(_) => "degenerate-input",
            Error::Numerical(_) => "numerical",
            Error::Pair { source, .. } => source.kind(),
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
        }
    }

    /// True for failures of the numerical routines rather than of the caller's input.
    pub fn is_internal(&self) -> bool {
        match self {
            Error::Numerical(_) => true,
            Error::Pair { source, .. } => source.is_internal(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
