use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("geometry error in element {element}: {reason}")]
    Geometry { element: usize, reason: String },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("preconditioner state: {0}")]
    State(String),

    #[error("parse error in {path:?}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("solver did not converge at step {step}: {reason}")]
    NonConvergence { step: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), reason: reason.into() }
    }
}
