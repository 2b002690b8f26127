use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("mesh/zoning mismatch: {0}")]
    Mismatch(String),

    #[error("empty selection: no zone indicator exceeds the threshold")]
    EmptySelection,

    #[error("no detectable defect: whole spectrum lies below the truncation cutoff")]
    NoDetectableDefect,

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
