//! Gray-mapped 16QAM over CP-OFDM with AWGN and Rayleigh channels.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::semantic_codec::mix_seed;

pub const N_FFT: usize = 64;
pub const CP_LEN: usize = 16;
pub const BITS_PER_SYMBOL: usize = 4;

const TAP_DECAY_DB: f64 = 3.0;

fn scale() -> f64 {
    1.0 / 10f64.sqrt()
}

fn gray_level(hi: bool, lo: bool) -> f64 {
    match (hi, lo) {
        (false, false) => -3.0,
        (false, true) => -1.0,
        (true, true) => 1.0,
        (true, false) => 3.0,
    }
}

fn level_bits(x: f64) -> (bool, bool) {
    if x < -2.0 {
        (false, false)
    } else if x < 0.0 {
        (false, true)
    } else if x < 2.0 {
        (true, true)
    } else {
        (true, false)
    }
}

/// Maps 4 bits per symbol: I from the first pair, Q from the second.
pub fn qam16_map(bits: &BitString) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(BITS_PER_SYMBOL) {
        return Err(Error::Framing {
            len: bits.len(),
            unit: BITS_PER_SYMBOL,
        });
    }
    let b = bits.as_slice();
    Ok(b.chunks_exact(4)
        .map(|c| Complex64::new(gray_level(c[0], c[1]), gray_level(c[2], c[3])) * scale())
        .collect())
}

/// Hard-decision nearest-point demapping.
pub fn qam16_demap(symbols: &[Complex64]) -> BitString {
    let mut out = BitString::with_capacity(symbols.len() * 4);
    for z in symbols {
        let (i0, i1) = level_bits(z.re * 10f64.sqrt());
        let (q0, q1) = level_bits(z.im * 10f64.sqrt());
        out.push(i0);
        out.push(i1);
        out.push(q0);
        out.push(q1);
    }
    out
}

/// The 16 ideal constellation points.
pub fn qam16_points() -> Vec<Complex64> {
    (0..16u64)
        .map(|v| qam16_map(&BitString::from_uint(v, 4)).unwrap()[0])
        .collect()
}

/// Unitary FFT/IFFT pair with cyclic-prefix handling.
#[derive(Clone)]
pub struct OfdmModem {
    n_fft: usize,
    cp_len: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl Default for OfdmModem {
    fn default() -> Self {
        Self::new(N_FFT, CP_LEN)
    }
}

impl OfdmModem {
    pub fn new(n_fft: usize, cp_len: usize) -> Self {
        assert!(n_fft > 0 && cp_len <= n_fft);
        let mut planner = FftPlanner::new();
        Self {
            n_fft,
            cp_len,
            fft: planner.plan_fft_forward(n_fft),
            ifft: planner.plan_fft_inverse(n_fft),
        }
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    pub fn symbol_len(&self) -> usize {
        self.n_fft + self.cp_len
    }

    pub fn fft_unitary(&self, buf: &mut [Complex64]) {
        self.fft.process(buf);
        let norm = 1.0 / (self.n_fft as f64).sqrt();
        buf.iter_mut().for_each(|x| *x *= norm);
    }

    pub fn ifft_unitary(&self, buf: &mut [Complex64]) {
        self.ifft.process(buf);
        let norm = 1.0 / (self.n_fft as f64).sqrt();
        buf.iter_mut().for_each(|x| *x *= norm);
    }

    /// IFFT each block of `n_fft` symbols and prepend its cyclic prefix.
    pub fn modulate(&self, symbols: &[Complex64]) -> Result<Vec<Complex64>> {
        if !symbols.len().is_multiple_of(self.n_fft) {
            return Err(Error::Framing {
                len: symbols.len(),
                unit: self.n_fft,
            });
        }
        let mut out = Vec::with_capacity(symbols.len() / self.n_fft * self.symbol_len());
        let mut buf = vec![Complex64::default(); self.n_fft];
        for block in symbols.chunks_exact(self.n_fft) {
            buf.copy_from_slice(block);
            self.ifft_unitary(&mut buf);
            out.extend_from_slice(&buf[self.n_fft - self.cp_len..]);
            out.extend_from_slice(&buf);
        }
        Ok(out)
    }

    /// Strips the prefix, FFTs, and applies one-tap zero-forcing with the
    /// known channel response.
    pub fn demodulate_equalize(&self, samples: &[Complex64], ch: &ChannelModel) -> Result<Vec<Complex64>> {
        let response = ch.frequency_response(self.n_fft)?;
        self.demodulate_with(samples, &response)
    }

    pub fn demodulate_with(&self, samples: &[Complex64], response: &[Complex64]) -> Result<Vec<Complex64>> {
        if !samples.len().is_multiple_of(self.symbol_len()) {
            return Err(Error::Framing {
                len: samples.len(),
                unit: self.symbol_len(),
            });
        }
        let mut out = Vec::with_capacity(samples.len() / self.symbol_len() * self.n_fft);
        let mut buf = vec![Complex64::default(); self.n_fft];
        for block in samples.chunks_exact(self.symbol_len()) {
            buf.copy_from_slice(&block[self.cp_len..]);
            self.fft_unitary(&mut buf);
            out.extend(buf.iter().zip(response).map(|(y, h)| y / h));
        }
        Ok(out)
    }
}

pub fn ofdm_modulate(symbols: &[Complex64]) -> Result<Vec<Complex64>> {
    OfdmModem::default().modulate(symbols)
}

pub fn ofdm_demodulate_equalize(samples: &[Complex64], ch: &ChannelModel) -> Result<Vec<Complex64>> {
    OfdmModem::default().demodulate_equalize(samples, ch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Awgn,
    RayleighFlat,
    RayleighMultipath,
}

/// Block-fading channel: one impulse-response realization per `channel_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    /// `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub taps: usize,
    pub channel_seed: u64,
}

impl ChannelModel {
    pub fn awgn(snr_db: f64, channel_seed: u64) -> Self {
        Self {
            kind: ChannelKind::Awgn,
            snr_db,
            taps: 1,
            channel_seed,
        }
    }

    pub fn rayleigh_flat(snr_db: f64, channel_seed: u64) -> Self {
        Self {
            kind: ChannelKind::RayleighFlat,
            snr_db,
            taps: 1,
            channel_seed,
        }
    }

    pub fn rayleigh_multipath(snr_db: f64, taps: usize, channel_seed: u64) -> Self {
        Self {
            kind: ChannelKind::RayleighMultipath,
            snr_db,
            taps,
            channel_seed,
        }
    }

    pub fn with_seed(&self, channel_seed: u64) -> Self {
        Self {
            channel_seed,
            ..self.clone()
        }
    }

    pub fn with_snr(&self, snr_db: f64) -> Self {
        Self { snr_db, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 {
            return Err(Error::Configuration("channel needs at least one tap".into()));
        }
        if self.taps > CP_LEN {
            return Err(Error::Configuration(format!(
                "{} taps exceed the {CP_LEN}-sample cyclic prefix",
                self.taps
            )));
        }
        if self.snr_db.is_nan() {
            return Err(Error::Configuration("SNR is NaN".into()));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    /// Time-domain taps for this realization.
    pub fn impulse_response(&self) -> Result<Vec<Complex64>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[self.channel_seed, 0]));
        let cn = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let mut draw = || Complex64::new(cn.sample(&mut rng), cn.sample(&mut rng));
        Ok(match self.kind {
            ChannelKind::Awgn => vec![Complex64::new(1.0, 0.0)],
            ChannelKind::RayleighFlat => vec![draw()],
            ChannelKind::RayleighMultipath => {
                let profile: Vec<f64> = (0..self.taps)
                    .map(|l| 10f64.powf(-TAP_DECAY_DB * l as f64 / 10.0))
                    .collect();
                let total: f64 = profile.iter().sum();
                let raw: Vec<Complex64> = profile.iter().map(|p| draw() * (p / total).sqrt()).collect();
                let energy: f64 = raw.iter().map(|h| h.norm_sqr()).sum();
                raw.into_iter().map(|h| h / energy.sqrt()).collect()
            }
        })
    }

    /// Unnormalized DFT of the taps, the per-bin gain after a unitary FFT.
    pub fn frequency_response(&self, n_fft: usize) -> Result<Vec<Complex64>> {
        let taps = self.impulse_response()?;
        Ok((0..n_fft)
            .map(|k| {
                taps.iter()
                    .enumerate()
                    .map(|(l, h)| {
                        let phase = -2.0 * std::f64::consts::PI * (k * l) as f64 / n_fft as f64;
                        h * Complex64::from_polar(1.0, phase)
                    })
                    .sum()
            })
            .collect())
    }
}

/// Convolves with the channel taps (truncated to the input length) and adds
/// complex Gaussian noise of variance `Es / SNR`, `Es` being the mean
/// transmit sample energy.
pub fn apply_channel(samples: &[Complex64], ch: &ChannelModel) -> Result<Vec<Complex64>> {
    let taps = ch.impulse_response()?;
    let mut out: Vec<Complex64> = (0..samples.len())
        .map(|n| {
            taps.iter()
                .enumerate()
                .take(n + 1)
                .map(|(l, h)| h * samples[n - l])
                .sum()
        })
        .collect();
    if !ch.is_noiseless() && !samples.is_empty() {
        let es = samples.iter().map(|x| x.norm_sqr()).sum::<f64>() / samples.len() as f64;
        let variance = es / 10f64.powf(ch.snr_db / 10.0);
        let normal = Normal::new(0.0, (variance / 2.0).sqrt())
            .map_err(|e| Error::Configuration(format!("noise variance: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[ch.channel_seed, 1]));
        for y in out.iter_mut() {
            *y += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Ok(out)
}

/// Bit errors over bit count.
pub fn measure_ber(tx: &BitString, rx: &BitString) -> Result<f64> {
    if tx.is_empty() {
        return Err(Error::InvalidInput("BER over zero bits".into()));
    }
    Ok(tx.hamming_distance(rx)? as f64 / tx.len() as f64)
}

/// `(3/8) erfc(sqrt(SNR / 10))`, the Gray 16QAM nearest-neighbour approximation.
pub fn qam16_ber_approx(snr_db: f64) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    0.375 * statrs::function::erf::erfc((snr / 10.0).sqrt())
}

/// Map, modulate, pass through `ch`, equalize. Returns the equalized
/// frequency-domain symbols. `bits` is zero padded to whole OFDM symbols.
pub fn transmit_symbols(bits: &BitString, ch: &ChannelModel, modem: &OfdmModem) -> Result<Vec<Complex64>> {
    let block = modem.n_fft() * BITS_PER_SYMBOL;
    let padded = bits.resized(bits.len().div_ceil(block) * block);
    let tx = modem.modulate(&qam16_map(&padded)?)?;
    let rx = apply_channel(&tx, ch)?;
    let mut symbols = modem.demodulate_equalize(&rx, ch)?;
    symbols.truncate(bits.len().div_ceil(BITS_PER_SYMBOL));
    Ok(symbols)
}

/// Full PHY round trip; the returned bits have the input length.
pub fn transmit_bits(bits: &BitString, ch: &ChannelModel, modem: &OfdmModem) -> Result<BitString> {
    let symbols = transmit_symbols(bits, ch, modem)?;
    let mut out = qam16_demap(&symbols);
    out.truncate(bits.len());
    Ok(out)
}

/// Writes `re,im` rows, one per symbol.
pub fn write_constellation_csv<W: Write>(symbols: &[Complex64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Internal(format!("csv: {e}"));
    w.write_record(["re", "im"]).map_err(io)?;
    for z in symbols {
        w.write_record([z.re.to_string(), z.im.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Internal(format!("csv: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_bits(n: usize, seed: u64) -> BitString {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<bool>()).collect()
    }

    #[test]
    fn map_fixed_points() {
        let s = scale();
        let z = qam16_map(&BitString::from_bit_str("0000").unwrap()).unwrap()[0];
        assert!((z - c(-3.0 * s, -3.0 * s)).norm() < 1e-15);
        let z = qam16_map(&BitString::from_bit_str("1011").unwrap()).unwrap()[0];
        assert!((z - c(3.0 * s, 1.0 * s)).norm() < 1e-15);
    }

    #[test]
    fn constellation_has_unit_energy() {
        let pts = qam16_points();
        let mean = pts.iter().map(|z| z.norm_sqr()).sum::<f64>() / 16.0;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn map_rejects_partial_symbol() {
        assert!(matches!(
            qam16_map(&BitString::zeros(6)),
            Err(Error::Framing { len: 6, unit: 4 })
        ));
    }

    #[test]
    fn demap_inverts_map_and_tolerates_small_offsets() {
        let bits = random_bits(4096, 1);
        let syms = qam16_map(&bits).unwrap();
        assert_eq!(qam16_demap(&syms), bits);
        let half_min = 1.0 / 10f64.sqrt();
        let nudged: Vec<_> = syms
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let d = 0.99 * half_min;
                z + match i % 4 {
                    0 => c(d, 0.0),
                    1 => c(-d, 0.0),
                    2 => c(0.0, d),
                    _ => c(0.0, -d),
                }
            })
            .collect();
        assert_eq!(qam16_demap(&nudged), bits);
    }

    #[test]
    fn zero_block_modulates_to_zero() {
        let out = ofdm_modulate(&vec![Complex64::default(); 64]).unwrap();
        assert_eq!(out.len(), 80);
        assert!(out.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn single_bin_is_constant_magnitude() {
        let mut block = vec![Complex64::default(); 64];
        block[5] = c(1.0, 0.0);
        let out = ofdm_modulate(&block).unwrap();
        for z in &out {
            assert!((z.norm() - 0.125).abs() < 1e-12);
        }
        // prefix repeats the tail
        for i in 0..CP_LEN {
            assert!((out[i] - out[64 + i]).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_holds() {
        let syms = qam16_map(&random_bits(256, 2)).unwrap();
        let out = ofdm_modulate(&syms).unwrap();
        let freq: f64 = syms.iter().map(|z| z.norm_sqr()).sum();
        let time: f64 = out[CP_LEN..].iter().map(|z| z.norm_sqr()).sum();
        assert!((freq - time).abs() < 1e-9 * freq);
    }

    #[test]
    fn fft_round_trip_is_tight() {
        let modem = OfdmModem::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x: Vec<Complex64> = (0..64)
                .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let mut y = x.clone();
            modem.ifft_unitary(&mut y);
            modem.fft_unitary(&mut y);
            let err: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let norm: f64 = x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            assert!(err / norm < 1e-9);
        }
    }

    #[test]
    fn noiseless_awgn_is_identity() {
        let x: Vec<Complex64> = (0..100).map(|i| c(i as f64, -(i as f64))).collect();
        assert_eq!(apply_channel(&x, &ChannelModel::awgn(f64::INFINITY, 0)).unwrap(), x);
    }

    #[test]
    fn measured_snr_matches_target() {
        let x = vec![c(1.0, 0.0); 100_000];
        let y = apply_channel(&x, &ChannelModel::awgn(10.0, 7)).unwrap();
        let noise: f64 = x.iter().zip(&y).map(|(a, b)| (b - a).norm_sqr()).sum::<f64>() / x.len() as f64;
        let snr_db = 10.0 * (1.0 / noise).log10();
        assert!((snr_db - 10.0).abs() < 0.3, "measured {snr_db}");
    }

    #[test]
    fn multipath_taps_have_unit_power() {
        for seed in 0..50 {
            let taps = ChannelModel::rayleigh_multipath(20.0, 8, seed)
                .impulse_response()
                .unwrap();
            let p: f64 = taps.iter().map(|h| h.norm_sqr()).sum();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn taps_beyond_prefix_rejected() {
        let ch = ChannelModel::rayleigh_multipath(20.0, CP_LEN + 1, 0);
        assert!(matches!(
            apply_channel(&[c(1.0, 0.0)], &ch),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn noiseless_chains_are_exact() {
        let modem = OfdmModem::default();
        let bits = random_bits(64 * 4 * 10, 4);
        for ch in [
            ChannelModel::awgn(f64::INFINITY, 1),
            ChannelModel::rayleigh_flat(f64::INFINITY, 2),
            ChannelModel::rayleigh_multipath(f64::INFINITY, CP_LEN, 3),
        ] {
            let syms = transmit_symbols(&bits, &ch, &modem).unwrap();
            let sent = qam16_map(&bits).unwrap();
            for (a, b) in syms.iter().zip(&sent) {
                assert!((a - b).norm() < 1e-9);
            }
            assert_eq!(transmit_bits(&bits, &ch, &modem).unwrap(), bits);
        }
    }

    #[test]
    fn ber_edge_values() {
        let a = BitString::from_bit_str("1100").unwrap();
        let comp = BitString::from_bit_str("0011").unwrap();
        let half = BitString::from_bit_str("1111").unwrap();
        assert_eq!(measure_ber(&a, &a).unwrap(), 0.0);
        assert_eq!(measure_ber(&a, &comp).unwrap(), 1.0);
        assert_eq!(measure_ber(&a, &half).unwrap(), 0.5);
        assert!(measure_ber(&a, &BitString::zeros(3)).is_err());
        assert!(measure_ber(&BitString::new(), &BitString::new()).is_err());
    }

    #[test]
    fn constellation_csv_rows() {
        let mut buf = Vec::new();
        write_constellation_csv(&qam16_points(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("re,im"));
        assert_eq!(text.lines().count(), 17);
    }
}
