use thiserror::Error;

use crate::group::GroupId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("group mismatch: {left} vs {right}")]
    GroupMismatch { left: GroupId, right: GroupId },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },

    #[error("invalid group element: {0}")]
    InvalidElement(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported for group {group}: {what}")]
    Unsupported { group: GroupId, what: &'static str },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("encoding {0} was not seen while building the dictionary")]
    UnseenEncoding(String),
}

pub type Result<T> = std::result::Result<T, Error>;
