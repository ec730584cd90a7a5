use sha2::{Digest, Sha256};

use super::chacha::chacha20_block;
use crate::bits::BitString;
use crate::error::{Error, Result};

pub const LABEL_XOR: &[u8] = b"xor";
pub const LABEL_PAD: &[u8] = b"pad";
pub const LABEL_DUMMY: &[u8] = b"dummy";
pub const LABEL_WEIGHTS: &[u8] = b"weights";
pub const LABEL_SKEY_TRANSPORT: &[u8] = b"skey-transport";

const BLOCK_BITS: u64 = 512;
const MAX_REJECTIONS: usize = 1000;

/// Deterministic labelled bit stream.
///
/// Bits come from the ChaCha20 keystream under `key`, with the nonce taken
/// from the first 12 bytes of `SHA-256(label)` and block counter
/// `position / 512`. Bits within each byte are read most-significant first.
#[derive(Clone)]
pub struct Keystream {
    key: [u8; 32],
    nonce: [u8; 12],
    position: u64,
    cached: Option<(u64, [u8; 64])>,
}

impl std::fmt::Debug for Keystream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Keystream")
            .field("nonce", &hex::encode(self.nonce))
            .field("position", &self.position)
            .finish_non_exhaustive()
    }
}

/// Left-aligns up to 256 seed bits into a ChaCha20 key, zero padding the rest.
pub fn key_from_seed(seed: &BitString) -> Result<[u8; 32]> {
    if seed.len() > 256 {
        return Err(Error::InvalidInput(format!(
            "keystream seed has {} bits, at most 256 allowed",
            seed.len()
        )));
    }
    let mut key = [0u8; 32];
    let bytes = seed.to_bytes();
    key[..bytes.len()].copy_from_slice(&bytes);
    Ok(key)
}

pub fn nonce_for_label(label: &[u8]) -> [u8; 12] {
    let digest = Sha256::digest(label);
    digest[..12].try_into().unwrap()
}

impl Keystream {
    pub fn new(seed: &BitString, label: &[u8]) -> Result<Self> {
        Ok(Self::from_key(key_from_seed(seed)?, label))
    }

    pub fn from_key(key: [u8; 32], label: &[u8]) -> Self {
        Self::with_nonce(key, nonce_for_label(label))
    }

    /// Raw key/nonce constructor, bypassing label hashing.
    pub fn with_nonce(key: [u8; 32], nonce: [u8; 12]) -> Self {
        Self {
            key,
            nonce,
            position: 0,
            cached: None,
        }
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn seek(&mut self, position: u64) {
        self.position = position;
    }

    pub fn skip(&mut self, nbits: u64) {
        self.position += nbits;
    }

    fn block(&mut self, index: u64) -> &[u8; 64] {
        if self.cached.map(|(i, _)| i) != Some(index) {
            let counter = u32::try_from(index).expect("keystream exhausted the 32-bit block counter");
            self.cached = Some((index, chacha20_block(&self.key, counter, &self.nonce)));
        }
        &self.cached.as_ref().unwrap().1
    }

    fn next_bit(&mut self) -> bool {
        let pos = self.position;
        let offset = (pos % BLOCK_BITS) as usize;
        let byte = self.block(pos / BLOCK_BITS)[offset / 8];
        self.position += 1;
        (byte >> (7 - offset % 8)) & 1 == 1
    }

    /// Returns the next `nbits` bits and advances the position.
    pub fn next_bits(&mut self, nbits: usize) -> BitString {
        let mut out = BitString::with_capacity(nbits);
        for _ in 0..nbits {
            out.push(self.next_bit());
        }
        out
    }

    /// Next `width` bits as a big-endian integer.
    pub fn next_uint(&mut self, width: u32) -> u64 {
        assert!(width <= 64);
        (0..width).fold(0u64, |acc, _| (acc << 1) | self.next_bit() as u64)
    }

    pub fn next_u32(&mut self) -> u32 {
        self.next_uint(32) as u32
    }

    /// Unbiased draw from `[0, m)` by rejection sampling 32-bit words.
    pub fn draw_uniform(&mut self, m: u64) -> Result<u64> {
        if m == 0 || m > 1 << 32 {
            return Err(Error::InvalidParameters(format!("uniform range {m} outside [1, 2^32]")));
        }
        let limit = ((1u64 << 32) / m) * m;
        for _ in 0..MAX_REJECTIONS {
            let word = self.next_u32() as u64;
            if word < limit {
                return Ok(word % m);
            }
        }
        Err(Error::Internal(format!(
            "uniform draw over {m} rejected {MAX_REJECTIONS} consecutive words"
        )))
    }
}

/// Free-function form of [`Keystream::next_bits`].
pub fn keystream_bits(ks: &mut Keystream, nbits: usize) -> BitString {
    ks.next_bits(nbits)
}

pub fn draw_uniform(ks: &mut Keystream, m: u64) -> Result<u64> {
    ks.draw_uniform(m)
}
