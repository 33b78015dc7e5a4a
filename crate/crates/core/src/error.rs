use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural mismatch: {0}")]
    Structure(String),

    #[error("dynamics domain violation in {term} (t = {step:?})")]
    Domain { term: &'static str, step: Option<usize> },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach a timestep index to a dynamics domain error.
    pub(crate) fn at_step(self, t: usize) -> Self {
        match self {
            Error::Domain { term, .. } => Error::Domain { term, step: Some(t) },
            other => other,
        }
    }
}
