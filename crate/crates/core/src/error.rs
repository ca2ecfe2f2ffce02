use thiserror::Error;

/// Errors raised by ring arithmetic, sampling and the signature scheme.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ring parameter mismatch: {0}")]
    Mismatch(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("gaussian width {sigma} is below the required floor {floor}")]
    SigmaBelowFloor { sigma: f64, floor: f64 },

    #[error("trapdoor does not belong to the given matrix")]
    TrapdoorMismatch,

    #[error("the block owned by the trapdoor is absent from the extended matrix")]
    BlockAbsent,

    #[error("invalid ring: {0}")]
    InvalidRing(String),

    #[error("invalid circuit: {0}")]
    Circuit(String),

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
