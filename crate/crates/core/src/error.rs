use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("reducible chain: {0}")]
    ReducibleChain(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("divergent moment: {}", .0.join("; "))]
    DivergentMoment(Vec<String>),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unsupported law: {0}")]
    UnsupportedLaw(String),
}

impl Error {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { path: path.into(), message: message.into() }
    }

    /// True for errors caused by the input document rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Schema(_) | Error::Validation { .. } | Error::ReducibleChain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
