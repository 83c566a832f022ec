//! Python module `hetnet`: configuration, analytic coverage/ASE, Monte Carlo
//! estimates and figure presets.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hetnet_core::config;
use hetnet_core::coverage::{ase_from_coverage, coverage_total};
use hetnet_core::experiments::{self, Engine, Override};
use hetnet_core::montecarlo::{ase_from_coverage_estimate, run_coverage_mc};
use hetnet_core::sdinr::Fidelity;
use hetnet_core::Error;

fn to_py(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Validated network scenario.
#[pyclass(name = "NetworkConfig", module = "hetnet", frozen)]
struct PyNetworkConfig {
    inner: config::NetworkConfig,
}

#[pymethods]
impl PyNetworkConfig {
    /// Parses a JSON scenario document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyNetworkConfig {
            inner: config::load_config(text).map_err(to_py)?,
        })
    }

    /// Reference network used by the presets (tier j at density 5e-6 / 2^j).
    #[staticmethod]
    #[pyo3(signature = (tiers = 1))]
    fn reference(tiers: usize) -> Self {
        PyNetworkConfig {
            inner: experiments::reference_network(tiers),
        }
    }

    /// Canonical JSON document in linear units.
    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    #[getter]
    fn tier_count(&self) -> usize {
        self.inner.tiers.len()
    }

    /// Copy with dotted-key overrides, e.g. {"tiers.*.aging.delta": 0.9}.
    fn with_overrides(&self, overrides: &Bound<'_, PyDict>) -> PyResult<Self> {
        let mut list = Vec::new();
        for (k, v) in overrides.iter() {
            let key: String = k.extract()?;
            let value = if let Ok(b) = v.extract::<bool>() {
                serde_json::Value::from(b)
            } else if let Ok(i) = v.extract::<i64>() {
                serde_json::Value::from(i)
            } else if let Ok(f) = v.extract::<f64>() {
                serde_json::Value::from(f)
            } else {
                serde_json::Value::from(v.extract::<String>()?)
            };
            list.push(Override::new(key, value));
        }
        Ok(PyNetworkConfig {
            inner: experiments::with_overrides(&self.inner, &list).map_err(to_py)?,
        })
    }

    /// Analytic coverage: dict with raw, clamped, los, nlos.
    fn coverage<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let cfg = self.inner.clone();
        let r = py.detach(move || coverage_total(&cfg)).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("raw", r.raw)?;
        d.set_item("clamped", r.clamped)?;
        d.set_item("los", r.los())?;
        d.set_item("nlos", r.nlos())?;
        Ok(d)
    }

    /// Analytic area spectral efficiency in bits/s/Hz/m^2.
    fn ase(&self, py: Python<'_>) -> PyResult<f64> {
        let cfg = self.inner.clone();
        let c = py.detach(|| coverage_total(&cfg)).map_err(to_py)?;
        Ok(ase_from_coverage(&self.inner, c.clamped).ase)
    }

    /// Monte Carlo coverage: dict with estimate, stderr, drops, empty_drops, ase, ase_stderr.
    #[pyo3(signature = (drops = 10_000, mode = "distributional"))]
    fn run_coverage_mc<'py>(&self, py: Python<'py>, drops: usize, mode: &str) -> PyResult<Bound<'py, PyDict>> {
        let fidelity: Fidelity = mode.parse().map_err(to_py)?;
        let cfg = self.inner.clone();
        let est = py.detach(move || run_coverage_mc(&cfg, drops, fidelity)).map_err(to_py)?;
        let ase = ase_from_coverage_estimate(&self.inner, &est);
        let d = PyDict::new(py);
        d.set_item("estimate", est.estimate)?;
        d.set_item("stderr", est.stderr)?;
        d.set_item("drops", est.drops)?;
        d.set_item("empty_drops", est.empty_drops)?;
        d.set_item("ase", ase.estimate)?;
        d.set_item("ase_stderr", ase.stderr)?;
        Ok(d)
    }

    /// Directivity gain PMF [(gain, probability)] for interferers of tier `tier`.
    fn directivity_pmf(&self, tier: usize) -> PyResult<Vec<(f64, f64)>> {
        let t = self
            .inner
            .tiers
            .get(tier)
            .ok_or_else(|| PyValueError::new_err(format!("tier {tier} out of range")))?;
        Ok(hetnet_core::geometry::directivity_pmf(&self.inner.rx_beam, &t.tx_beam).to_vec())
    }

    fn __repr__(&self) -> String {
        format!("NetworkConfig(tiers={}, hash={})", self.inner.tiers.len(), &self.inner.fingerprint()[..12])
    }
}

#[pyfunction]
fn kappa_from_bits(bits: u32) -> f64 {
    config::kappa_from_bits(bits)
}

#[pyfunction]
fn atn_from_amplifier(noise_figure_db: f64, bits: u32, thermal_noise: f64) -> f64 {
    config::atn_from_amplifier(noise_figure_db, bits, thermal_noise)
}

#[pyfunction]
fn jakes_delta(doppler_hz: f64, symbol_period_s: f64) -> f64 {
    config::jakes_delta(doppler_hz, symbol_period_s)
}

#[pyfunction]
fn los_probability(r: f64, blockage_rate: f64) -> f64 {
    hetnet_core::geometry::los_probability(r, blockage_rate)
}

/// Runs a figure preset and returns the curve file as a string.
#[pyfunction]
#[pyo3(signature = (name, engine = "analytic", drops = 10_000, mode = "distributional", overrides = None))]
fn run_preset(
    py: Python<'_>,
    name: &str,
    engine: &str,
    drops: usize,
    mode: &str,
    overrides: Option<Vec<String>>,
) -> PyResult<String> {
    let engine: Engine = engine.parse().map_err(to_py)?;
    let fidelity: Fidelity = mode.parse().map_err(to_py)?;
    let overrides = overrides
        .unwrap_or_default()
        .iter()
        .map(|s| Override::parse(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let name = name.to_string();
    let result = py
        .detach(move || experiments::run_preset(&name, &overrides, engine, drops, fidelity))
        .map_err(to_py)?;
    let mut buf = Vec::new();
    experiments::write_csv(&mut buf, &result).map_err(to_py)?;
    String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn hetnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetworkConfig>()?;
    m.add_function(wrap_pyfunction!(kappa_from_bits, m)?)?;
    m.add_function(wrap_pyfunction!(atn_from_amplifier, m)?)?;
    m.add_function(wrap_pyfunction!(jakes_delta, m)?)?;
    m.add_function(wrap_pyfunction!(los_probability, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add("PRESETS", experiments::PRESETS.to_vec())?;
    Ok(())
}
