//! Simulated physical-layer key agreement over a reciprocal channel.
//!
//! Both parties observe the same channel gains plus independent probe noise,
//! quantize with a guard band around their own median, exchange discarded
//! indices, drop 8-bit blocks whose parities disagree, and amplify the
//! surviving bits with SHA-256 in counter mode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};

const PARITY_BLOCK: usize = 8;

/// Probed channel-gain magnitudes, one per probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    pub samples: Vec<f64>,
    /// Consecutive probes sharing one gain value.
    pub coherence: usize,
    pub probe_noise_std: f64,
}

impl ChannelTrace {
    pub fn new(samples: Vec<f64>, coherence: usize, probe_noise_std: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("channel trace has no samples".into()));
        }
        if coherence == 0 {
            return Err(Error::InvalidParameters("coherence must be at least 1".into()));
        }
        if probe_noise_std.is_nan() || probe_noise_std < 0.0 {
            return Err(Error::InvalidParameters("probe noise std must be >= 0".into()));
        }
        Ok(Self {
            samples,
            coherence,
            probe_noise_std,
        })
    }

    /// A static channel: one gain held for the whole trace.
    pub fn constant(gain: f64, probes: usize, probe_noise_std: f64) -> Result<Self> {
        Self::new(vec![gain; probes], probes.max(1), probe_noise_std)
    }

    /// Rayleigh magnitudes, each held for `coherence` probes.
    pub fn rayleigh(probes: usize, coherence: usize, probe_noise_std: f64, seed: u64) -> Result<Self> {
        if coherence == 0 {
            return Err(Error::InvalidParameters("coherence must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let mut samples = Vec::with_capacity(probes);
        while samples.len() < probes {
            let (re, im): (f64, f64) = (normal.sample(&mut rng), normal.sample(&mut rng));
            let gain = re.hypot(im);
            let n = coherence.min(probes - samples.len());
            samples.extend(std::iter::repeat_n(gain, n));
        }
        Self::new(samples, coherence, probe_noise_std)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlkOutcome {
    /// Transmitter-side key after amplification.
    pub plk: BitString,
    /// Receiver-side key; differs from `plk` only if an even number of
    /// errors slipped through a parity block.
    pub peer_plk: BitString,
    /// Transmitter bits after reconciliation, before amplification.
    pub pre_amplification: BitString,
    pub entropy_estimate: f64,
}

/// Empirical Shannon entropy per bit of a bit string (0 for empty input).
pub fn empirical_entropy(bits: &BitString) -> f64 {
    if bits.is_empty() {
        return 0.0;
    }
    let p = bits.count_ones() as f64 / bits.len() as f64;
    binary_entropy(p)
}

fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Guard-band quantization: `Some(bit)` outside the band, `None` inside it.
fn quantize(observed: &[f64], guard_band: f64) -> Vec<Option<bool>> {
    let m = median(observed);
    let sd = std_dev(observed);
    let hi = m + guard_band * sd;
    let lo = m - guard_band * sd;
    observed
        .iter()
        .map(|&x| {
            if x > hi {
                Some(true)
            } else if x < lo {
                Some(false)
            } else {
                None
            }
        })
        .collect()
}

fn observe(trace: &ChannelTrace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if trace.probe_noise_std == 0.0 {
        return trace.samples.clone();
    }
    let noise = Normal::new(0.0, trace.probe_noise_std).unwrap();
    trace.samples.iter().map(|&g| g + noise.sample(rng)).collect()
}

/// Maps `bits` to exactly `target_bits` with SHA-256 in counter mode:
/// block `i` is `SHA-256(i_be32 || len_be64 || packed bits)`.
pub fn privacy_amplify(bits: &BitString, target_bits: usize) -> BitString {
    let packed = bits.to_bytes();
    let len = (bits.len() as u64).to_be_bytes();
    let mut out = BitString::with_capacity(target_bits);
    let mut counter = 0u32;
    while out.len() < target_bits {
        let mut h = Sha256::new();
        h.update(counter.to_be_bytes());
        h.update(len);
        h.update(&packed);
        out.extend_from(&BitString::from_bytes(&h.finalize()));
        counter += 1;
    }
    out.truncate(target_bits);
    out
}

/// Runs probing, quantization, reconciliation and amplification.
pub fn simulate_plk(trace: &ChannelTrace, target_bits: usize, guard_band: f64, noise_seed: u64) -> Result<PlkOutcome> {
    if target_bits == 0 {
        return Err(Error::InvalidParameters("target_bits must be at least 1".into()));
    }
    if guard_band.is_nan() || guard_band < 0.0 {
        return Err(Error::InvalidParameters("guard band must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let alice = quantize(&observe(trace, &mut rng), guard_band);
    let bob = quantize(&observe(trace, &mut rng), guard_band);

    // indices kept by both sides
    let (a_bits, b_bits): (Vec<bool>, Vec<bool>) =
        alice.iter().zip(&bob).filter_map(|(a, b)| Some(((*a)?, (*b)?))).unzip();

    let mut agreed_a = BitString::new();
    let mut agreed_b = BitString::new();
    for (ba, bb) in a_bits.chunks(PARITY_BLOCK).zip(b_bits.chunks(PARITY_BLOCK)) {
        let pa = ba.iter().filter(|&&x| x).count() % 2;
        let pb = bb.iter().filter(|&&x| x).count() % 2;
        if pa == pb {
            ba.iter().for_each(|&x| agreed_a.push(x));
            bb.iter().for_each(|&x| agreed_b.push(x));
        }
    }

    let entropy_estimate = empirical_entropy(&agreed_a);
    if agreed_a.len() < PARITY_BLOCK {
        return Err(Error::InsufficientEntropy {
            agreed_bits: agreed_a.len(),
            entropy_estimate,
        });
    }
    Ok(PlkOutcome {
        plk: privacy_amplify(&agreed_a, target_bits),
        peer_plk: privacy_amplify(&agreed_b, target_bits),
        pre_amplification: agreed_a,
        entropy_estimate,
    })
}
