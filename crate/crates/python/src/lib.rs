//! Python bindings. Bit strings cross the boundary as `str` of `'0'`/`'1'`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use semshield::experiments::{ExperimentConfig, Scenario};
use semshield::keying::{self, WeightVector};
use semshield::obfuscation::{self, ObfuscatedFrame, ObfuscationParams};
use semshield::ofdm_phy::{self, ChannelModel, OfdmModem};
use semshield::security_analysis as sa;
use semshield::semantic_codec::{self, BleuScores, CodecModel, TokenSequence};
use semshield::{BitString, Error};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn bits(s: &str) -> PyResult<BitString> {
    BitString::from_bit_str(s).map_err(py_err)
}

/// Token codec with a configurable semantic deviation rate.
#[pyclass(name = "Codec", frozen)]
struct PyCodec {
    inner: CodecModel,
}

#[pymethods]
impl PyCodec {
    #[new]
    #[pyo3(signature = (vocab_size = 4096, deviation_rate = 0.1, seed = 0))]
    fn new(vocab_size: u32, deviation_rate: f64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: CodecModel::new(vocab_size, deviation_rate, seed).map_err(py_err)?,
        })
    }

    #[getter]
    fn token_bits(&self) -> u32 {
        self.inner.token_bits
    }

    fn encode(&self, tokens: Vec<u32>) -> PyResult<String> {
        let seq = TokenSequence::new(tokens, self.inner.vocab_size).map_err(py_err)?;
        Ok(semantic_codec::encode(&seq, &self.inner).map_err(py_err)?.to_string())
    }

    #[pyo3(signature = (bits_str, noise_seed = 0))]
    fn decode(&self, bits_str: &str, noise_seed: u64) -> PyResult<Vec<u32>> {
        let seq = semantic_codec::decode(&bits(bits_str)?, &self.inner, noise_seed).map_err(py_err)?;
        Ok(seq.tokens().to_vec())
    }
}

/// Per-order BLEU scores `[b1, b2, b3, b4]` of `hypothesis` against `reference`.
#[pyfunction]
fn bleu_scores(reference: Vec<u32>, hypothesis: Vec<u32>) -> PyResult<[f64; 4]> {
    semantic_codec::bleu_scores_f64(&reference, &hypothesis).map_err(py_err)
}

/// First `nbits` of the labelled keystream for `seed`.
#[pyfunction]
fn keystream(seed: &str, label: &str, nbits: usize) -> PyResult<String> {
    let mut ks = keying::Keystream::new(&bits(seed)?, label.as_bytes()).map_err(py_err)?;
    Ok(ks.next_bits(nbits).to_string())
}

/// SKey bits from BLEU scores and raw fixed-point weights.
#[pyfunction]
#[pyo3(signature = (scores, weights, weight_bits = 16, key_bits = 128))]
fn generate_skey(scores: [f64; 4], weights: [u32; 4], weight_bits: u32, key_bits: usize) -> PyResult<String> {
    let w = WeightVector::new(weights, weight_bits).map_err(py_err)?;
    let skey = keying::generate_skey(&BleuScores::from_f64(scores), &w, key_bits).map_err(py_err)?;
    Ok(skey.to_string())
}

#[pyfunction]
fn make_seed_key(skey: &str, plk: &str) -> PyResult<String> {
    Ok(keying::make_seed_key(&bits(skey)?, &bits(plk)?)
        .map_err(py_err)?
        .to_string())
}

#[pyclass(name = "ObfuscationParams", frozen)]
struct PyParams {
    inner: ObfuscationParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (s_max = 4, k_max = 10, n_d = 64, bits_per_subcarrier = 4))]
    fn new(s_max: u32, k_max: u32, n_d: u32, bits_per_subcarrier: u32) -> PyResult<Self> {
        Ok(Self {
            inner: ObfuscationParams::new(s_max, k_max, n_d, bits_per_subcarrier).map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ObfuscationParams(s_max={}, k_max={}, n_d={}, bits_per_subcarrier={})",
            p.s_max, p.k_max, p.n_d, p.bits_per_subcarrier
        )
    }
}

/// Encrypted, obfuscated frame.
#[pyclass(name = "Frame", frozen)]
struct PyFrame {
    inner: ObfuscatedFrame,
}

#[pymethods]
impl PyFrame {
    #[getter]
    fn payload_bits(&self) -> u64 {
        self.inner.l_d
    }

    #[getter]
    fn units(&self) -> Vec<(u32, u32, Vec<u32>)> {
        self.inner
            .units
            .iter()
            .map(|u| (u.s, u.k, u.dummy_locations.clone()))
            .collect()
    }

    /// Bits in transmission order, ready for the modem.
    fn air_bits(&self) -> String {
        self.inner.air_bits().to_string()
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.inner.to_bytes()
    }

    #[staticmethod]
    fn from_bytes(data: &[u8], params: &PyParams) -> PyResult<Self> {
        Ok(Self {
            inner: ObfuscatedFrame::from_bytes(data, &params.inner).map_err(py_err)?,
        })
    }
}

#[pyfunction]
fn obfuscate(data: &str, seed: &str, params: &PyParams, codec: &PyCodec) -> PyResult<PyFrame> {
    let frame = obfuscation::obfuscate(&bits(data)?, &bits(seed)?, &params.inner, &codec.inner).map_err(py_err)?;
    Ok(PyFrame { inner: frame })
}

#[pyfunction]
fn deobfuscate(frame: &PyFrame, seed: &str, params: &PyParams) -> PyResult<String> {
    let out = obfuscation::deobfuscate(&frame.inner, &bits(seed)?, &params.inner).map_err(py_err)?;
    Ok(out.to_string())
}

/// Receiver over raw air bits; never fails on a wrong seed.
#[pyfunction]
fn deobfuscate_air(air: &str, payload_bits: u64, seed: &str, params: &PyParams) -> PyResult<String> {
    let out = obfuscation::deobfuscate_air(&bits(air)?, payload_bits, &bits(seed)?, &params.inner).map_err(py_err)?;
    Ok(out.to_string())
}

fn channel(kind: &str, snr_db: f64, taps: usize, seed: u64) -> PyResult<ChannelModel> {
    match kind {
        "awgn" => Ok(ChannelModel::awgn(snr_db, seed)),
        "rayleigh_flat" => Ok(ChannelModel::rayleigh_flat(snr_db, seed)),
        "rayleigh_multipath" => Ok(ChannelModel::rayleigh_multipath(snr_db, taps, seed)),
        other => Err(PyValueError::new_err(format!("unknown channel kind {other:?}"))),
    }
}

/// Sends `data` through 16QAM OFDM over the given channel and returns the
/// equalized hard-decision bits.
#[pyfunction]
#[pyo3(signature = (data, snr_db, kind = "awgn", taps = 1, seed = 0))]
fn transmit(data: &str, snr_db: f64, kind: &str, taps: usize, seed: u64) -> PyResult<String> {
    let ch = channel(kind, snr_db, taps, seed)?;
    let rx = ofdm_phy::transmit_bits(&bits(data)?, &ch, &OfdmModem::default()).map_err(py_err)?;
    Ok(rx.to_string())
}

#[pyfunction]
fn qam16_ber_approx(snr_db: f64) -> f64 {
    ofdm_phy::qam16_ber_approx(snr_db)
}

/// Every search-space formula as `{id: (exact_decimal, log2)}`.
#[pyfunction]
#[pyo3(signature = (s_max = 4, k_max = 10, n_d = 64, n_unit = 1, seed_bits = 128, weight_bits = 16))]
fn search_spaces<'py>(
    py: Python<'py>,
    s_max: u32,
    k_max: u32,
    n_d: u32,
    n_unit: u32,
    seed_bits: u32,
    weight_bits: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let reports = [
        sa::ss_dummy_location(s_max, k_max, n_d).map_err(py_err)?,
        sa::ss_dummy_location_dynamic(s_max, k_max, n_d).map_err(py_err)?,
        sa::ss_data(s_max, k_max, n_d, n_unit).map_err(py_err)?,
        sa::ss_weight(weight_bits),
        sa::ss_skey(seed_bits),
        sa::ss_seedkey(seed_bits),
        sa::ss_seedkey_baseline(s_max, k_max, seed_bits),
        sa::ss_seedkey_dynamic(s_max, k_max, n_unit, seed_bits),
        sa::ss_total(s_max, k_max, n_d, n_unit, seed_bits).map_err(py_err)?,
    ];
    let out = PyDict::new(py);
    for r in reports {
        out.set_item(r.formula.to_string(), (r.exact.to_string(), r.log2))?;
    }
    Ok(out)
}

/// Runs a named scenario with a JSON config and returns the rendered output.
#[pyfunction]
#[pyo3(signature = (scenario, config_json = "{}"))]
fn run_scenario(py: Python<'_>, scenario: &str, config_json: &str) -> PyResult<String> {
    let sc: Scenario = scenario.parse().map_err(py_err)?;
    let cfg = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    py.detach(|| semshield::experiments::run_scenario(sc, &cfg))
        .map_err(py_err)
}

#[pymodule(name = "semshield")]
fn semshield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCodec>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyFrame>()?;
    m.add_function(wrap_pyfunction!(bleu_scores, m)?)?;
    m.add_function(wrap_pyfunction!(keystream, m)?)?;
    m.add_function(wrap_pyfunction!(generate_skey, m)?)?;
    m.add_function(wrap_pyfunction!(make_seed_key, m)?)?;
    m.add_function(wrap_pyfunction!(obfuscate, m)?)?;
    m.add_function(wrap_pyfunction!(deobfuscate, m)?)?;
    m.add_function(wrap_pyfunction!(deobfuscate_air, m)?)?;
    m.add_function(wrap_pyfunction!(transmit, m)?)?;
    m.add_function(wrap_pyfunction!(qam16_ber_approx, m)?)?;
    m.add_function(wrap_pyfunction!(search_spaces, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
