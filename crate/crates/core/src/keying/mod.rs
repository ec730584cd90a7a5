//! Key material: physical-layer keys, labelled keystreams, BLEU weights,
//! semantic keys and their combination into the seed key.

mod chacha;
pub mod plk;
pub mod stream;

pub use chacha::chacha20_block;
pub use plk::{empirical_entropy, privacy_amplify, simulate_plk, ChannelTrace, PlkOutcome};
pub use stream::{
    draw_uniform, key_from_seed, keystream_bits, nonce_for_label, Keystream, LABEL_DUMMY, LABEL_PAD,
    LABEL_SKEY_TRANSPORT, LABEL_WEIGHTS, LABEL_XOR,
};

use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::semantic_codec::BleuScores;

pub const DEFAULT_WEIGHT_BITS: u32 = 16;
pub const DEFAULT_KEY_BITS: usize = 128;

/// Four fixed-point weights `raw / 2^bits`, each in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WeightVector {
    pub raw: [u32; 4],
    pub bits: u32,
}

impl WeightVector {
    pub fn new(raw: [u32; 4], bits: u32) -> Result<Self> {
        if bits == 0 || bits > 31 {
            return Err(Error::InvalidParameters(format!("weight width {bits} outside [1, 31]")));
        }
        if raw.iter().any(|&w| w >= 1 << bits) {
            return Err(Error::InvalidParameters(format!("weight exceeds {bits}-bit range")));
        }
        Ok(Self { raw, bits })
    }

    pub fn to_f64(&self) -> [f64; 4] {
        let scale = (1u64 << self.bits) as f64;
        self.raw.map(|w| w as f64 / scale)
    }
}

/// Draws `w1..w4` in order, `bits` stream bits each.
pub fn weight_generator(ks: &mut Keystream, bits: u32) -> Result<WeightVector> {
    if bits == 0 || bits > 31 {
        return Err(Error::InvalidParameters(format!("weight width {bits} outside [1, 31]")));
    }
    weights_from_bits(&ks.next_bits(4 * bits as usize), bits)
}

/// Splits `4 * bits` stream bits into four big-endian weights.
pub fn weights_from_bits(stream: &BitString, bits: u32) -> Result<WeightVector> {
    let width = bits as usize;
    if stream.len() != 4 * width {
        return Err(Error::LengthMismatch {
            left: stream.len(),
            right: 4 * width,
        });
    }
    let raw = core::array::from_fn(|i| stream.read_uint(i * width, width) as u32);
    WeightVector::new(raw, bits)
}

/// Fractional part of the weighted score sum, as a Q0.32 word.
///
/// Products of Q0.32 scores and weights are summed exactly, aligned back to
/// 32 fractional bits by truncation, and reduced mod 1 by keeping the low
/// 32 bits.
pub fn generated_bleu(scores: &BleuScores, w: &WeightVector) -> u32 {
    let sum: u128 = scores
        .s
        .iter()
        .zip(w.raw)
        .map(|(s, w)| s.raw() as u128 * w as u128)
        .sum();
    (sum >> w.bits) as u32
}

/// First `key_bits` bits of `SHA-256(generated_bleu as 4 big-endian bytes)`.
pub fn generate_skey(scores: &BleuScores, w: &WeightVector, key_bits: usize) -> Result<BitString> {
    if key_bits == 0 || key_bits > 256 {
        return Err(Error::InvalidParameters(format!(
            "SKey length {key_bits} outside [1, 256]"
        )));
    }
    let digest = Sha256::digest(generated_bleu(scores, w).to_be_bytes());
    Ok(BitString::from_bytes_truncated(&digest, key_bits))
}

/// `skey XOR plk`.
pub fn make_seed_key(skey: &BitString, plk: &BitString) -> Result<BitString> {
    skey.xor(plk)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    pub plk: BitString,
    pub skey: BitString,
    pub seed_key: BitString,
}

impl KeyMaterial {
    /// Combines the keys; `skey` is zero padded or truncated to the PLK length.
    pub fn derive(skey: BitString, plk: BitString) -> Result<Self> {
        let aligned = skey.resized(plk.len());
        let seed_key = make_seed_key(&aligned, &plk)?;
        Ok(Self { plk, skey, seed_key })
    }
}

/// Encrypts SKey under the PLK keystream for delivery to the peer.
pub fn transport_skey(skey: &BitString, plk: &BitString) -> Result<BitString> {
    let mut ks = Keystream::new(plk, LABEL_SKEY_TRANSPORT)?;
    skey.xor(&ks.next_bits(skey.len()))
}

pub fn recover_skey(ciphertext: &BitString, plk: &BitString) -> Result<BitString> {
    transport_skey(ciphertext, plk)
}

/// One fixture line: `label, seed_hex, first_64_bytes_hex`.
pub fn golden_line(label: &str, seed: &BitString) -> Result<String> {
    let mut ks = Keystream::new(seed, label.as_bytes())?;
    Ok(format!("{label}, {}, {}", seed.to_hex(), ks.next_bits(512).to_hex()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenVector {
    pub label: String,
    pub seed: BitString,
    pub first_64_bytes: Vec<u8>,
}

pub fn parse_golden_fixture(text: &str) -> Result<Vec<GoldenVector>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [label, seed_hex, stream_hex] = fields[..] else {
                return Err(Error::InvalidInput(format!("fixture line needs 3 fields: {line:?}")));
            };
            let bad_hex = |e: hex::FromHexError| Error::InvalidInput(format!("{line:?}: {e}"));
            Ok(GoldenVector {
                label: label.to_string(),
                seed: BitString::from_bytes(&hex::decode(seed_hex).map_err(bad_hex)?),
                first_64_bytes: hex::decode(stream_hex).map_err(bad_hex)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic_codec::Q32;

    fn zero_skey_digest() -> BitString {
        // SHA-256 of four zero bytes
        let hex = "df3f619804a92fdb4057192dc43dd748ea778adc52bc498ce80524c014b81119";
        BitString::from_bytes_truncated(&hex::decode(hex).unwrap(), 128)
    }

    #[test]
    fn half_weight_fixed_point() {
        let mut bits = BitString::from_uint(0x8000, 16);
        bits.extend_from(&BitString::zeros(48));
        let w = weights_from_bits(&bits, 16).unwrap();
        assert_eq!(w.to_f64(), [0.5, 0.0, 0.0, 0.0]);
        let zeros = weights_from_bits(&BitString::zeros(64), 16).unwrap();
        assert_eq!(zeros.raw, [0; 4]);
    }

    #[test]
    fn weights_drawn_in_order() {
        let seed = BitString::from_uint(77, 64);
        let mut ks = Keystream::new(&seed, LABEL_WEIGHTS).unwrap();
        let w = weight_generator(&mut ks, 16).unwrap();
        let mut again = Keystream::new(&seed, LABEL_WEIGHTS).unwrap();
        let raw: Vec<u32> = (0..4).map(|_| again.next_uint(16) as u32).collect();
        assert_eq!(w.raw.to_vec(), raw);
        assert_eq!(ks.position(), 64);
    }

    #[test]
    fn saturated_scores_zero_weights() {
        let scores = BleuScores::new(Q32::ONE, Q32::ONE, Q32::ONE, Q32::ONE);
        let w = WeightVector::new([0; 4], 16).unwrap();
        assert_eq!(generated_bleu(&scores, &w), 0);
        assert_eq!(generate_skey(&scores, &w, 128).unwrap(), zero_skey_digest());
    }

    #[test]
    fn zero_scores_any_weights() {
        let w = WeightVector::new([1, 999, 0xffff, 12345], 16).unwrap();
        let skey = generate_skey(&BleuScores::default(), &w, 128).unwrap();
        assert_eq!(skey, zero_skey_digest());
    }

    #[test]
    fn half_times_half_wraps_to_zero() {
        let half = Q32::from_f64(0.5);
        let scores = BleuScores::new(half, half, half, half);
        let w = WeightVector::new([0x8000; 4], 16).unwrap();
        assert_eq!(generated_bleu(&scores, &w), 0);
    }

    #[test]
    fn generated_bleu_matches_rational_sum() {
        let scores = BleuScores::from_f64([0.75, 0.5, 0.25, 0.125]);
        let w = WeightVector::new([0x4000, 0x8000, 0xc000, 0x2000], 16).unwrap();
        // 0.1875 + 0.25 + 0.1875 + 0.015625 = 0.640625
        assert_eq!(generated_bleu(&scores, &w), (0.640625 * 4_294_967_296.0) as u32);
    }

    #[test]
    fn seed_key_xor_properties() {
        let a = BitString::from_uint(0xdead_beef_cafe, 48);
        let zero = BitString::zeros(48);
        assert_eq!(make_seed_key(&a, &a).unwrap(), zero);
        assert_eq!(make_seed_key(&a, &zero).unwrap(), a);
        assert!(make_seed_key(&a, &BitString::zeros(47)).is_err());
    }

    #[test]
    fn key_material_pads_short_skey() {
        let km = KeyMaterial::derive(BitString::from_uint(0b11, 2), BitString::zeros(8)).unwrap();
        assert_eq!(km.seed_key.to_string(), "11000000");
    }

    #[test]
    fn skey_transport_round_trip() {
        let plk = BitString::from_uint(0x1234_5678, 32).resized(128);
        let skey = BitString::from_uint(0x0bad_f00d, 32).resized(128);
        let ct = transport_skey(&skey, &plk).unwrap();
        assert_ne!(ct, skey);
        assert_eq!(recover_skey(&ct, &plk).unwrap(), skey);
    }

    #[test]
    fn golden_fixture_parse() {
        let line = golden_line("weights", &BitString::zeros(128)).unwrap();
        let parsed = parse_golden_fixture(&line).unwrap();
        assert_eq!(parsed[0].label, "weights");
        assert_eq!(parsed[0].first_64_bytes.len(), 64);
        assert!(parse_golden_fixture("a, 00").is_err());
    }
}
