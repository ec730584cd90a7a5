//! Semantic-key encryption and subcarrier obfuscation for OFDM links.
//!
//! A seed key is formed from a physical-layer key and a semantic key hashed
//! from weighted BLEU scores. The seed drives keystream encryption and the
//! per-unit placement of dummy subcarriers; the [`ofdm_phy`] module carries
//! the result over simulated channels and [`security_analysis`] counts what
//! an exhaustive attacker must search.

pub mod bits;
pub mod error;
pub mod experiments;
pub mod keying;
pub mod obfuscation;
pub mod ofdm_phy;
pub mod security_analysis;
pub mod semantic_codec;

pub use bits::BitString;
pub use error::{Error, Result};
