use thiserror::Error;

use crate::algebra::AlgebraKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid algebra descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("algebra descriptor mismatch: {left} vs {right}")]
    DescriptorMismatch { left: String, right: String },

    #[error("operation requires a {expected:?} element, got {found:?}")]
    WrongKind {
        expected: AlgebraKind,
        found: AlgebraKind,
    },

    #[error("operation is not defined for {0:?} elements")]
    Unsupported(AlgebraKind),

    #[error("sub-model index {index} out of range (algebra has {count})")]
    SubmodelOutOfRange { index: usize, count: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("storage length {found} does not match descriptor (expected {expected})")]
    StorageLength { expected: usize, found: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("idx format: {0}")]
    Idx(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("image: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
