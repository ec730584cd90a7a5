use thiserror::Error;

/// Errors produced across the codec, keying, obfuscation and PHY layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("token id {token} is out of range for vocabulary size {vocab_size}")]
    InvalidToken { token: u32, vocab_size: u32 },

    #[error("framing error: bit length {len} is not a multiple of {unit}")]
    Framing { len: usize, unit: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("insufficient entropy: {agreed_bits} agreed bits (entropy estimate {entropy_estimate})")]
    InsufficientEntropy { agreed_bits: usize, entropy_estimate: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("frame desynchronized at unit {unit}: {detail}")]
    Desync { unit: usize, detail: String },

    #[error("channel configuration: {0}")]
    Configuration(String),

    #[error("malformed frame encoding: {0}")]
    Malformed(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
