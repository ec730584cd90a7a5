//! Deterministic token codec and single-reference BLEU scoring.
//!
//! The codec stands in for a learned semantic encoder/decoder: tokens are
//! serialized as fixed-width big-endian fields, and the decoder injects
//! seeded token substitutions at a tunable deviation rate so that the BLEU
//! scores between a sentence and its reconstruction vary from sentence to
//! sentence.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

pub const DEFAULT_VOCAB_SIZE: u32 = 4096;

/// Token ids drawn from a vocabulary of `vocab_size` entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    tokens: Vec<u32>,
    vocab_size: u32,
}

impl TokenSequence {
    pub fn new(tokens: Vec<u32>, vocab_size: u32) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::InvalidParameters("vocabulary size must be positive".into()));
        }
        if let Some(&token) = tokens.iter().find(|&&t| t >= vocab_size) {
            return Err(Error::InvalidToken { token, vocab_size });
        }
        Ok(Self { tokens, vocab_size })
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Parameters of the toy semantic codec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodecModel {
    pub vocab_size: u32,
    pub token_bits: u32,
    /// Per-token substitution probability applied by the decoder.
    pub deviation_rate: f64,
    pub codec_seed: u64,
}

impl Default for CodecModel {
    fn default() -> Self {
        Self::new(DEFAULT_VOCAB_SIZE, 0.1, 0).expect("default codec is valid")
    }
}

impl CodecModel {
    /// Builds a codec with `token_bits = ceil(log2 vocab_size)` (at least 1).
    pub fn new(vocab_size: u32, deviation_rate: f64, codec_seed: u64) -> Result<Self> {
        let token_bits = bits_for_vocab(vocab_size)?;
        Self::with_token_bits(vocab_size, token_bits, deviation_rate, codec_seed)
    }

    pub fn with_token_bits(vocab_size: u32, token_bits: u32, deviation_rate: f64, codec_seed: u64) -> Result<Self> {
        let model = Self {
            vocab_size,
            token_bits,
            deviation_rate,
            codec_seed,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 {
            return Err(Error::InvalidParameters("vocabulary size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.deviation_rate) {
            return Err(Error::InvalidParameters(format!(
                "deviation rate {} outside [0, 1]",
                self.deviation_rate
            )));
        }
        if self.token_bits == 0 || self.token_bits > 32 {
            return Err(Error::InvalidParameters(format!(
                "token width {} outside [1, 32]",
                self.token_bits
            )));
        }
        if self.token_bits < 32 && (self.vocab_size as u64) > (1u64 << self.token_bits) {
            return Err(Error::InvalidParameters(format!(
                "{} bits cannot hold vocabulary of {}",
                self.token_bits, self.vocab_size
            )));
        }
        Ok(())
    }

    pub fn without_noise(&self) -> Self {
        Self {
            deviation_rate: 0.0,
            ..self.clone()
        }
    }
}

fn bits_for_vocab(vocab_size: u32) -> Result<u32> {
    if vocab_size == 0 {
        return Err(Error::InvalidParameters("vocabulary size must be positive".into()));
    }
    let bits = 32 - (vocab_size - 1).leading_zeros();
    Ok(bits.max(1))
}

/// Serializes each token big-endian in `token_bits` bits.
pub fn encode(seq: &TokenSequence, model: &CodecModel) -> Result<BitString> {
    encode_tokens(seq.tokens(), model)
}

pub(crate) fn encode_tokens(tokens: &[u32], model: &CodecModel) -> Result<BitString> {
    let width = model.token_bits as usize;
    let mut out = BitString::with_capacity(tokens.len() * width);
    for &t in tokens {
        if t >= model.vocab_size {
            return Err(Error::InvalidToken {
                token: t,
                vocab_size: model.vocab_size,
            });
        }
        out.extend_from(&BitString::from_uint(t as u64, width));
    }
    Ok(out)
}

/// Recovers tokens from their bit fields, then substitutes each one with
/// probability `deviation_rate` by a uniformly chosen different token.
///
/// The substitution draw for position `i` depends only on
/// `(codec_seed, noise_seed, i)`. A field whose value falls outside the
/// vocabulary (possible after channel errors) is reduced modulo `vocab_size`.
pub fn decode(bits: &BitString, model: &CodecModel, noise_seed: u64) -> Result<TokenSequence> {
    let width = model.token_bits as usize;
    if !bits.len().is_multiple_of(width) {
        return Err(Error::Framing {
            len: bits.len(),
            unit: width,
        });
    }
    let v = model.vocab_size;
    let tokens = (0..bits.len() / width)
        .map(|pos| {
            let raw = (bits.read_uint(pos * width, width) % v as u64) as u32;
            substitute(raw, pos as u64, model, noise_seed)
        })
        .collect();
    TokenSequence::new(tokens, v)
}

fn substitute(token: u32, position: u64, model: &CodecModel, noise_seed: u64) -> u32 {
    let v = model.vocab_size;
    if model.deviation_rate <= 0.0 || v < 2 {
        return token;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[model.codec_seed, noise_seed, position]));
    if rng.random::<f64>() < model.deviation_rate {
        let r = rng.random_range(0..v - 1);
        if r >= token {
            r + 1
        } else {
            r
        }
    } else {
        token
    }
}

/// SplitMix64 finalizer folded over the inputs.
pub(crate) fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

/// Unsigned Q0.32 fixed-point value in `[0, 1]`.
///
/// The raw value is `round(x * 2^32)`; 1.0 is represented exactly as `2^32`,
/// so the raw field needs 33 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Q32(u64);

impl Q32 {
    pub const ONE: Q32 = Q32(1 << 32);
    pub const ZERO: Q32 = Q32(0);

    /// Rounds to nearest, ties away from zero, clamping into `[0, 1]`.
    pub fn from_f64(x: f64) -> Q32 {
        let clamped = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        Q32((clamped * 4_294_967_296.0).round() as u64)
    }

    pub fn from_raw(raw: u64) -> Result<Q32> {
        if raw > 1 << 32 {
            return Err(Error::InvalidInput(format!("Q0.32 raw value {raw} exceeds 1.0")));
        }
        Ok(Q32(raw))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 4_294_967_296.0
    }
}

/// BLEU scores for gram orders 1 through 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BleuScores {
    pub s: [Q32; 4],
}

impl BleuScores {
    pub fn new(s1: Q32, s2: Q32, s3: Q32, s4: Q32) -> Self {
        Self { s: [s1, s2, s3, s4] }
    }

    pub fn from_f64(values: [f64; 4]) -> Self {
        Self {
            s: values.map(Q32::from_f64),
        }
    }

    /// Score for gram order `n` in `1..=4`.
    pub fn gram(&self, n: usize) -> Q32 {
        self.s[n - 1]
    }

    pub fn to_f64(&self) -> [f64; 4] {
        self.s.map(Q32::to_f64)
    }
}

fn ngram_counts(tokens: &[u32], n: usize) -> HashMap<&[u32], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Unquantized per-order BLEU: brevity penalty times clipped n-gram precision.
pub fn bleu_scores_f64(reference: &[u32], hypothesis: &[u32]) -> Result<[f64; 4]> {
    if reference.is_empty() || hypothesis.is_empty() {
        return Err(Error::InvalidInput(
            "BLEU needs non-empty reference and hypothesis".into(),
        ));
    }
    let c = hypothesis.len() as f64;
    let r = reference.len() as f64;
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };

    let mut out = [0.0; 4];
    for (idx, slot) in out.iter_mut().enumerate() {
        let n = idx + 1;
        if hypothesis.len() < n {
            continue;
        }
        let hyp = ngram_counts(hypothesis, n);
        let reference_counts = ngram_counts(reference, n);
        let total = hypothesis.len() - n + 1;
        let clipped: usize = hyp
            .iter()
            .map(|(g, &cnt)| cnt.min(reference_counts.get(g).copied().unwrap_or(0)))
            .sum();
        if clipped > 0 {
            *slot = bp * clipped as f64 / total as f64;
        }
    }
    Ok(out)
}

pub fn bleu_scores(reference: &TokenSequence, hypothesis: &TokenSequence) -> Result<BleuScores> {
    bleu_scores_f64(reference.tokens(), hypothesis.tokens()).map(BleuScores::from_f64)
}

/// Parses a corpus: one sentence per line, whitespace-separated decimal ids.
/// Blank lines are skipped.
pub fn parse_corpus(text: &str, vocab_size: u32) -> Result<Vec<TokenSequence>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(lineno, line)| {
            let tokens = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<u32>()
                        .map_err(|e| Error::InvalidInput(format!("line {}: bad token {t:?}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            TokenSequence::new(tokens, vocab_size)
        })
        .collect()
}

pub fn format_corpus(corpus: &[TokenSequence]) -> String {
    let mut out = String::new();
    for seq in corpus {
        let line: Vec<String> = seq.tokens().iter().map(u32::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Seeded synthetic corpus of `n` sentences with lengths in `[min_len, max_len]`.
///
/// Tokens follow a Zipf-like rank distribution so that n-gram repeats occur
/// occasionally within a sentence.
pub fn synthetic_corpus(
    n: usize,
    min_len: usize,
    max_len: usize,
    vocab_size: u32,
    seed: u64,
) -> Result<Vec<TokenSequence>> {
    if min_len == 0 || min_len > max_len {
        return Err(Error::InvalidParameters(format!(
            "sentence length range [{min_len}, {max_len}] is empty"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(min_len..=max_len);
            let tokens = (0..len)
                .map(|_| {
                    // rank ~ V^u gives a heavy head over small ids
                    let u: f64 = rng.random();
                    let rank = (vocab_size as f64).powf(u) as u32;
                    rank.saturating_sub(1).min(vocab_size - 1)
                })
                .collect();
            TokenSequence::new(tokens, vocab_size)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(t: &[u32], v: u32) -> TokenSequence {
        TokenSequence::new(t.to_vec(), v).unwrap()
    }

    #[test]
    fn encode_zero_token() {
        let m = CodecModel::default();
        assert_eq!(m.token_bits, 12);
        let bits = encode(&seq(&[0], 4096), &m).unwrap();
        assert_eq!(bits, BitString::zeros(12));
    }

    #[test]
    fn encode_four_bit_tokens() {
        let m = CodecModel::new(16, 0.0, 0).unwrap();
        assert_eq!(m.token_bits, 4);
        let bits = encode(&seq(&[1, 2], 16), &m).unwrap();
        assert_eq!(bits.to_string(), "00010010");
    }

    #[test]
    fn invalid_token_rejected() {
        assert!(matches!(
            TokenSequence::new(vec![3, 16], 16),
            Err(Error::InvalidToken {
                token: 16,
                vocab_size: 16
            })
        ));
        let m = CodecModel::new(16, 0.0, 0).unwrap();
        assert!(encode_tokens(&[99], &m).is_err());
    }

    #[test]
    fn framing_error() {
        let m = CodecModel::default();
        assert!(matches!(
            decode(&BitString::zeros(13), &m, 0),
            Err(Error::Framing { len: 13, unit: 12 })
        ));
    }

    #[test]
    fn forced_substitution_binary_vocab() {
        let m = CodecModel::new(2, 1.0, 7).unwrap();
        let bits = encode(&seq(&[0, 0, 0], 2), &m).unwrap();
        assert_eq!(decode(&bits, &m, 3).unwrap().tokens(), &[1, 1, 1]);
    }

    #[test]
    fn round_trip_without_noise() {
        let m = CodecModel::new(4096, 0.0, 1).unwrap();
        let corpus = synthetic_corpus(1000, 1, 30, 4096, 99).unwrap();
        for (i, s) in corpus.iter().enumerate() {
            let bits = encode(s, &m).unwrap();
            assert_eq!(&decode(&bits, &m, i as u64).unwrap(), s);
        }
    }

    #[test]
    fn substitution_rate_within_binomial_bound() {
        let m = CodecModel::new(4096, 0.1, 5).unwrap();
        let tokens: Vec<u32> = (0..100_000u32).map(|i| i % 4096).collect();
        let s = seq(&tokens, 4096);
        let out = decode(&encode(&s, &m).unwrap(), &m, 11).unwrap();
        let changed = s.tokens().iter().zip(out.tokens()).filter(|(a, b)| a != b).count();
        let frac = changed as f64 / tokens.len() as f64;
        assert!((0.094..=0.106).contains(&frac), "substitution fraction {frac}");
    }

    #[test]
    fn decode_is_deterministic() {
        let m = CodecModel::new(4096, 0.3, 5).unwrap();
        let s = seq(&[5, 6, 7, 8, 9, 10], 4096);
        let bits = encode(&s, &m).unwrap();
        assert_eq!(decode(&bits, &m, 1).unwrap(), decode(&bits, &m, 1).unwrap());
    }

    #[test]
    fn bleu_identity() {
        let s = seq(&[4, 8, 15, 16, 23, 42], 64);
        let b = bleu_scores(&s, &s).unwrap();
        assert_eq!(b.s, [Q32::ONE; 4]);
    }

    #[test]
    fn bleu_disjoint_is_zero() {
        let b = bleu_scores(&seq(&[1, 2, 3, 4], 16), &seq(&[5, 6, 7, 8], 16)).unwrap();
        assert_eq!(b.s, [Q32::ZERO; 4]);
    }

    #[test]
    fn bleu_the_cat_sat() {
        // the=1 cat=2 sat=3
        let b = bleu_scores(&seq(&[1, 2, 3], 16), &seq(&[1, 2], 16)).unwrap();
        let expected = (-0.5f64).exp();
        assert_eq!(b.s[0], Q32::from_f64(expected));
        assert_eq!(b.s[1], Q32::from_f64(expected));
        assert!((b.s[0].to_f64() - 0.60653).abs() < 1e-5);
        assert_eq!(b.s[2], Q32::ZERO);
        assert_eq!(b.s[3], Q32::ZERO);
    }

    #[test]
    fn bleu_clips_repeated_ngrams() {
        // hypothesis repeats a unigram more often than the reference
        let b = bleu_scores_f64(&[7, 1, 2, 3], &[7, 7, 7, 7]).unwrap();
        assert_eq!(b[0], 0.25);
        assert_eq!(b[1], 0.0);
    }

    #[test]
    fn bleu_rejects_empty() {
        assert!(bleu_scores_f64(&[], &[1]).is_err());
        assert!(bleu_scores_f64(&[1], &[]).is_err());
    }

    #[test]
    fn q32_rounding_ties_away() {
        // 0.5 ulp above zero rounds up
        assert_eq!(Q32::from_f64(0.5 / 4_294_967_296.0).raw(), 1);
        assert_eq!(Q32::from_f64(1.0).raw(), 1 << 32);
        assert_eq!(Q32::from_f64(0.5).raw(), 1 << 31);
    }

    #[test]
    fn corpus_round_trip() {
        let text = "1 2 3\n\n4 5\n";
        let c = parse_corpus(text, 16).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(format_corpus(&c), "1 2 3\n4 5\n");
        assert!(parse_corpus("1 x", 16).is_err());
        assert!(parse_corpus("17", 16).is_err());
    }
}
