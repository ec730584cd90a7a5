//! Exhaustive-search cost of attacking the scheme, kept as exact integers.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::keying::{generated_bleu, weight_generator, Keystream};
use crate::semantic_codec::{bleu_scores, decode, encode, CodecModel, TokenSequence};

/// Largest `s * n_d` the enumeration oracle accepts.
pub const ENUMERATION_LIMIT: u32 = 24;
pub const HISTOGRAM_BINS: usize = 64;
pub const MIN_DISPERSION_CORPUS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulaId {
    /// Dummy placements in one unit with known `[s, k]`.
    Eq3,
    /// Dummy placements in one unit with only `[s_max, k_max]` known.
    Eq4,
    /// Unknown-bound placements compounded over all units.
    Eq5,
    /// Four BLEU weights.
    Eq6,
    /// SKey.
    Eq7,
    /// Seed key.
    Eq8,
    /// Seed key of the fixed-`[s, k]` baseline.
    Eq9,
    /// Seed key plus per-unit `[s, k]` guesses.
    Eq10,
    /// Data placements times seed-key guesses: the full attacker space.
    Eq11,
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).unwrap();
        f.write_str(s.as_str().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpaceReport {
    pub formula: FormulaId,
    pub exact: BigUint,
    pub log2: f64,
    pub inputs: BTreeMap<&'static str, u64>,
}

impl SearchSpaceReport {
    fn new(formula: FormulaId, exact: BigUint, inputs: &[(&'static str, u64)]) -> Self {
        let log2 = log2_big(&exact);
        Self {
            formula,
            exact,
            log2,
            inputs: inputs.iter().copied().collect(),
        }
    }
}

impl Serialize for SearchSpaceReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = serializer.serialize_map(Some(4))?;
        m.serialize_entry("formula_id", &self.formula)?;
        m.serialize_entry("exact", &self.exact.to_string())?;
        m.serialize_entry("log2", &self.log2)?;
        m.serialize_entry("inputs", &self.inputs)?;
        m.end()
    }
}

/// Base-2 logarithm from the top 64 bits of the integer.
pub fn log2_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 64 {
        return x.to_u64().unwrap().to_f64().unwrap().log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap();
    (top as f64).log2() + shift as f64
}

/// `C(n, k)` by the multiplicative formula; each step divides exactly.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn pow2(l: u64) -> BigUint {
    BigUint::one() << l
}

fn check_unit(s: u32, k: u32, n_d: u32) -> Result<()> {
    if s == 0 || k == 0 || (s as u64) * (n_d as u64) <= k as u64 {
        return Err(Error::InvalidParameters(format!(
            "need s >= 1, k >= 1 and s*n_d > k; got s={s}, k={k}, n_d={n_d}"
        )));
    }
    Ok(())
}

pub fn ss_dummy_location(s: u32, k: u32, n_d: u32) -> Result<SearchSpaceReport> {
    check_unit(s, k, n_d)?;
    Ok(SearchSpaceReport::new(
        FormulaId::Eq3,
        binomial(s as u64 * n_d as u64, k as u64),
        &[("s", s as u64), ("k", k as u64), ("n_d", n_d as u64)],
    ))
}

fn dynamic_sum(s_max: u32, k_max: u32, n_d: u32) -> BigUint {
    let mut total = BigUint::zero();
    for s in 1..=s_max as u64 {
        let n = s * n_d as u64;
        for k in (1..=k_max as u64).filter(|&k| k < n) {
            total += binomial(n, k);
        }
    }
    total
}

fn check_bounds(s_max: u32, k_max: u32) -> Result<()> {
    if s_max == 0 || k_max == 0 {
        return Err(Error::InvalidParameters("s_max and k_max must be at least 1".into()));
    }
    Ok(())
}

pub fn ss_dummy_location_dynamic(s_max: u32, k_max: u32, n_d: u32) -> Result<SearchSpaceReport> {
    check_bounds(s_max, k_max)?;
    Ok(SearchSpaceReport::new(
        FormulaId::Eq4,
        dynamic_sum(s_max, k_max, n_d),
        &[("s_max", s_max as u64), ("k_max", k_max as u64), ("n_d", n_d as u64)],
    ))
}

pub fn ss_data(s_max: u32, k_max: u32, n_d: u32, n_unit: u32) -> Result<SearchSpaceReport> {
    check_bounds(s_max, k_max)?;
    if n_unit == 0 {
        return Err(Error::InvalidParameters("n_unit must be at least 1".into()));
    }
    Ok(SearchSpaceReport::new(
        FormulaId::Eq5,
        dynamic_sum(s_max, k_max, n_d).pow(n_unit),
        &[
            ("s_max", s_max as u64),
            ("k_max", k_max as u64),
            ("n_d", n_d as u64),
            ("n_unit", n_unit as u64),
        ],
    ))
}

pub fn ss_weight(weight_bits: u32) -> SearchSpaceReport {
    SearchSpaceReport::new(
        FormulaId::Eq6,
        pow2(weight_bits as u64).pow(4u32),
        &[("l_weight", weight_bits as u64)],
    )
}

pub fn ss_skey(skey_bits: u32) -> SearchSpaceReport {
    SearchSpaceReport::new(FormulaId::Eq7, pow2(skey_bits as u64), &[("l_skey", skey_bits as u64)])
}

pub fn ss_seedkey(seed_bits: u32) -> SearchSpaceReport {
    SearchSpaceReport::new(
        FormulaId::Eq8,
        pow2(seed_bits as u64),
        &[("l_seedkey", seed_bits as u64)],
    )
}

/// Baseline with fixed `[s, k]`: `s * k * 2^L`.
pub fn ss_seedkey_baseline(s: u32, k: u32, seed_bits: u32) -> SearchSpaceReport {
    SearchSpaceReport::new(
        FormulaId::Eq9,
        BigUint::from(s) * BigUint::from(k) * pow2(seed_bits as u64),
        &[("s", s as u64), ("k", k as u64), ("l_seedkey", seed_bits as u64)],
    )
}

/// `(s_max * k_max)^n_unit * 2^L`.
pub fn ss_seedkey_dynamic(s_max: u32, k_max: u32, n_unit: u32, seed_bits: u32) -> SearchSpaceReport {
    SearchSpaceReport::new(
        FormulaId::Eq10,
        (BigUint::from(s_max) * BigUint::from(k_max)).pow(n_unit) * pow2(seed_bits as u64),
        &[
            ("s_max", s_max as u64),
            ("k_max", k_max as u64),
            ("n_unit", n_unit as u64),
            ("l_seedkey", seed_bits as u64),
        ],
    )
}

pub fn ss_total(s_max: u32, k_max: u32, n_d: u32, n_unit: u32, seed_bits: u32) -> Result<SearchSpaceReport> {
    let data = ss_data(s_max, k_max, n_d, n_unit)?;
    let keys = ss_seedkey_dynamic(s_max, k_max, n_unit, seed_bits);
    Ok(SearchSpaceReport::new(
        FormulaId::Eq11,
        data.exact * keys.exact,
        &[
            ("s_max", s_max as u64),
            ("k_max", k_max as u64),
            ("n_d", n_d as u64),
            ("n_unit", n_unit as u64),
            ("l_seedkey", seed_bits as u64),
        ],
    ))
}

/// Counts `k`-subsets of `s * n_d` slots by generating each one (Gosper's
/// next-combination step over bitmasks).
pub fn brute_force_placements(n_d: u32, s: u32, k: u32) -> Result<u64> {
    let n = s
        .checked_mul(n_d)
        .filter(|&n| n <= ENUMERATION_LIMIT)
        .ok_or_else(|| Error::InvalidParameters(format!("s*n_d above enumeration bound {ENUMERATION_LIMIT}")))?;
    if k > n {
        return Ok(0);
    }
    if k == 0 {
        return Ok(1);
    }
    let limit = 1u32 << n;
    let mut mask: u32 = (1 << k) - 1;
    let mut count = 0u64;
    while mask < limit {
        count += 1;
        let lowest = mask & mask.wrapping_neg();
        let ripple = mask + lowest;
        mask = (((ripple ^ mask) >> 2) / lowest) | ripple;
    }
    Ok(count)
}

/// Unknown-bound placement count by enumeration; `None` if any unit size exceeds the bound.
pub fn brute_force_dynamic(s_max: u32, k_max: u32, n_d: u32) -> Option<u64> {
    let mut total = 0u64;
    for s in 1..=s_max {
        for k in (1..=k_max).filter(|&k| k < s * n_d) {
            total += brute_force_placements(n_d, s, k).ok()?;
        }
    }
    Some(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelStats {
    pub distinct: usize,
    pub histogram: Vec<u64>,
    pub entropy_bits: f64,
}

impl ChannelStats {
    /// `values` are Q0.32 raw values in `[0, 2^32]`.
    fn from_raw(values: &[u64]) -> Self {
        let distinct = values.iter().collect::<HashSet<_>>().len();
        let mut histogram = vec![0u64; HISTOGRAM_BINS];
        for &v in values {
            let bin = ((v * HISTOGRAM_BINS as u64) >> 32).min(HISTOGRAM_BINS as u64 - 1);
            histogram[bin as usize] += 1;
        }
        let n = values.len() as f64;
        let entropy_bits = histogram
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum();
        Self {
            distinct,
            histogram,
            entropy_bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionReport {
    pub sentences: usize,
    pub grams: [ChannelStats; 4],
    pub weighted_sum: ChannelStats,
}

impl DispersionReport {
    pub fn max_gram_entropy(&self) -> f64 {
        self.grams.iter().map(|g| g.entropy_bits).fold(0.0, f64::max)
    }
}

/// Per-sentence BLEU scores (sentence `i` decoded with noise seed `i`) and
/// the weighted sum under a fresh weight vector from `ks` per sentence.
pub fn bleu_dispersion_report(
    corpus: &[TokenSequence],
    model: &CodecModel,
    ks: &mut Keystream,
    weight_bits: u32,
) -> Result<DispersionReport> {
    if corpus.len() < MIN_DISPERSION_CORPUS {
        return Err(Error::InvalidInput(format!(
            "dispersion needs at least {MIN_DISPERSION_CORPUS} sentences, got {}",
            corpus.len()
        )));
    }
    let mut grams: [Vec<u64>; 4] = Default::default();
    let mut weighted = Vec::with_capacity(corpus.len());
    for (i, sentence) in corpus.iter().enumerate() {
        let received = decode(&encode(sentence, model)?, model, i as u64)?;
        let scores = bleu_scores(sentence, &received)?;
        for (g, s) in grams.iter_mut().zip(scores.s) {
            g.push(s.raw());
        }
        let w = weight_generator(ks, weight_bits)?;
        weighted.push(generated_bleu(&scores, &w) as u64);
    }
    Ok(DispersionReport {
        sentences: corpus.len(),
        grams: grams.map(|g| ChannelStats::from_raw(&g)),
        weighted_sum: ChannelStats::from_raw(&weighted),
    })
}
