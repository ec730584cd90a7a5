//! Owned bit strings with most-significant-first byte packing.

use std::fmt;

use crate::error::{Error, Result};

/// An ordered sequence of bits.
///
/// Byte conversions are always most-significant-bit first; a trailing partial
/// byte is zero padded on the right.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    pub fn with_capacity(cap: usize) -> Self {
        Self {
            bits: Vec::with_capacity(cap),
        }
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Parses a string of `'0'`/`'1'` characters. Whitespace and `_` are ignored.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                c if c.is_whitespace() || c == '_' => {}
                c => return Err(Error::InvalidInput(format!("unexpected character {c:?} in bit string"))),
            }
        }
        Ok(Self { bits })
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self::from_bytes_truncated(bytes, bytes.len() * 8)
    }

    /// Unpacks the first `nbits` bits of `bytes`.
    pub fn from_bytes_truncated(bytes: &[u8], nbits: usize) -> Self {
        assert!(nbits <= bytes.len() * 8, "not enough bytes for {nbits} bits");
        let bits = (0..nbits).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1 == 1).collect();
        Self { bits }
    }

    /// Big-endian `width`-bit encoding of `value`.
    pub fn from_uint(value: u64, width: usize) -> Self {
        assert!(width <= 64);
        let bits = (0..width).rev().map(|i| (value >> i) & 1 == 1).collect();
        Self { bits }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    /// Reads `width` bits starting at `start` as a big-endian integer.
    pub fn read_uint(&self, start: usize, width: usize) -> u64 {
        assert!(width <= 64);
        self.bits[start..start + width]
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.bits.get(i).copied()
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn truncate(&mut self, len: usize) {
        self.bits.truncate(len);
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        Self {
            bits: self.bits[start..end].to_vec(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Bitwise XOR of two equal-length strings.
    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(Self {
            bits: self.iter().zip(other.iter()).map(|(a, b)| a ^ b).collect(),
        })
    }

    pub fn hamming_distance(&self, other: &BitString) -> Result<usize> {
        Ok(self.xor(other)?.count_ones())
    }

    /// Zero-pads on the right or truncates to exactly `len` bits.
    pub fn resized(&self, len: usize) -> BitString {
        let mut bits = self.bits.clone();
        bits.resize(len, false);
        Self { bits }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({})", self)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self {
            bits: iter.into_iter().collect(),
        }
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        Self { bits }
    }
}
