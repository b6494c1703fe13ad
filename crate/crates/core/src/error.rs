use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("regime not bracketed: {0}")]
    RegimeNotBracketed(String),

    #[error("insufficient points for growth fit: need {needed}, have {have}")]
    InsufficientPoints { needed: usize, have: usize },

    #[error("requested {requested} distinct seed nodes from a graph of {available} nodes")]
    TooManySeedNodes { requested: usize, available: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
