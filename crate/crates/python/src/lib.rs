//! Python bindings. Matrices cross the boundary as lists of rows.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use co4_core::attention::{self, AttentionInputs};
use co4_core::harness::{self, ExperimentConfig, Suite, VerifyOptions};
use co4_core::numerics::{self, Mat};
use co4_core::precision::{self, PrecisionMatrix};
use co4_core::sim::{self, TrackEnv, Variant};
use co4_core::tpn::{self, MentalState, RegimeParams, TransferConfig};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn state_from(name: &str) -> PyResult<MentalState> {
    MentalState::ALL
        .into_iter()
        .find(|s| format!("{s:?}") == name)
        .ok_or_else(|| err(format!("unknown regime `{name}`")))
}

fn mat(rows: Vec<Vec<f64>>) -> PyResult<Mat> {
    Mat::from_rows(&rows).map_err(err)
}

/// R/C gains for one mental state.
#[pyclass(frozen, name = "Regime")]
struct PyRegime(RegimeParams);

#[pymethods]
impl PyRegime {
    #[new]
    fn new(state: &str, r_gain: f64, c_gain: f64) -> PyResult<Self> {
        RegimeParams::new(state_from(state)?, r_gain, c_gain)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn preset(state: &str) -> PyResult<Self> {
        Ok(Self(RegimeParams::preset(state_from(state)?)))
    }

    #[getter]
    fn state(&self) -> String {
        format!("{:?}", self.0.state())
    }

    #[getter]
    fn r_gain(&self) -> f64 {
        self.0.r_gain()
    }

    #[getter]
    fn c_gain(&self) -> f64 {
        self.0.c_gain()
    }

    fn __repr__(&self) -> String {
        format!(
            "Regime({:?}, r_gain={}, c_gain={})",
            self.0.state(),
            self.0.r_gain(),
            self.0.c_gain()
        )
    }
}

#[pyfunction]
fn softmax_row(v: Vec<f64>) -> PyResult<Vec<f64>> {
    numerics::softmax_row(&v).map_err(err)
}

/// Returns `(gamma, "Synchrony" | "Overload")`.
#[pyfunction]
fn overload_ratio(s_c: f64, s_r: f64) -> PyResult<(f64, String)> {
    let (g, c) = sim::overload_ratio(s_c, s_r).map_err(err)?;
    Ok((g, format!("{c:?}")))
}

#[pyfunction]
fn classify_regime(r_strength: f64, c_strength: f64) -> PyResult<String> {
    tpn::classify_regime(r_strength, c_strength)
        .map(|s| format!("{s:?}"))
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (evidence, context, w_r, w_c, interaction_scale, regime))]
fn mod_transfer(
    evidence: Vec<f64>,
    context: Vec<f64>,
    w_r: Vec<f64>,
    w_c: Vec<f64>,
    interaction_scale: f64,
    regime: &PyRegime,
) -> PyResult<f64> {
    let cfg = TransferConfig::new(w_r, w_c, interaction_scale).map_err(err)?;
    tpn::mod_transfer(&evidence, &context, &cfg, &regime.0).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (evidence, contexts, w_r, w_c, interaction_scale, regime, pi_min = precision::DEFAULT_PI_MIN))]
fn active_precision(
    evidence: Vec<Vec<f64>>,
    contexts: Vec<Vec<f64>>,
    w_r: Vec<f64>,
    w_c: Vec<f64>,
    interaction_scale: f64,
    regime: &PyRegime,
    pi_min: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let cfg = TransferConfig::new(w_r, w_c, interaction_scale).map_err(err)?;
    let pi =
        precision::active_precision(&evidence, &contexts, &cfg, &regime.0, pi_min).map_err(err)?;
    Ok(pi.values().to_rows())
}

#[pyfunction]
fn baseline_attention(
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
) -> PyResult<Vec<Vec<f64>>> {
    let inputs = AttentionInputs::new(mat(q)?, mat(k)?, mat(v)?).map_err(err)?;
    Ok(attention::baseline_attention(&inputs)
        .map_err(err)?
        .to_rows())
}

#[pyfunction]
#[pyo3(signature = (q, k, v, pi, pi_min = precision::DEFAULT_PI_MIN))]
fn gated_attention(
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pi: Vec<Vec<f64>>,
    pi_min: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let inputs = AttentionInputs::new(mat(q)?, mat(k)?, mat(v)?).map_err(err)?;
    let pi = PrecisionMatrix::new(mat(pi)?, pi_min).map_err(err)?;
    Ok(attention::gated_attention(&inputs, &pi)
        .map_err(err)?
        .to_rows())
}

/// One episode under the shipped (or a given JSON) config. Returns a dict of
/// metrics plus `positions` and `centerline`.
#[pyfunction]
#[pyo3(signature = (s_r, s_c, variant = "co4", seed = 0, horizon = None, config_json = None))]
fn run_episode<'py>(
    py: Python<'py>,
    s_r: usize,
    s_c: usize,
    variant: &str,
    seed: u64,
    horizon: Option<usize>,
    config_json: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let variant = match variant {
        "baseline" => Variant::Baseline,
        "co4" => Variant::Co4,
        other => return Err(err(format!("unknown variant `{other}`"))),
    };
    let mut cfg = match config_json {
        Some(text) => ExperimentConfig::from_json(text).map_err(err)?,
        None => ExperimentConfig::shipped(),
    };
    if let Some(h) = horizon {
        cfg.track.horizon = h;
    }
    let env = TrackEnv::from_spec(&cfg.track, seed).map_err(err)?;
    let agent = cfg.agent.agent(variant, s_c);
    let stream = cfg.stream.stream(s_r);
    let (metrics, traj) = py
        .detach(|| sim::run_episode(&env, &agent, &stream, &cfg.features, seed))
        .map_err(err)?;

    let out = PyDict::new(py);
    let json = serde_json::to_value(&metrics).map_err(err)?;
    for (k, v) in json.as_object().expect("metrics serialise to an object") {
        match v {
            serde_json::Value::Number(n) if n.is_u64() => out.set_item(k, n.as_u64())?,
            serde_json::Value::Number(n) => out.set_item(k, n.as_f64())?,
            other => out.set_item(
                k,
                other
                    .as_str()
                    .map(str::to_owned)
                    .unwrap_or_else(|| other.to_string()),
            )?,
        }
    }
    out.set_item("positions", traj.positions())?;
    out.set_item("centerline", traj.centerline())?;
    Ok(out)
}

type Failures = Vec<(String, u64, String)>;

/// Runs a verification suite; returns `(checks, failures)` with failures as
/// `(check, seed, detail)` tuples.
#[pyfunction]
#[pyo3(signature = (suite, instances = None, seed = 0))]
fn verify(
    py: Python<'_>,
    suite: &str,
    instances: Option<usize>,
    seed: u64,
) -> PyResult<(usize, Failures)> {
    let suite: Suite = suite.parse().map_err(err)?;
    let opts = VerifyOptions {
        base_seed: seed,
        instances,
        inject_fault: false,
    };
    let r = py.detach(|| harness::verify(suite, &opts));
    Ok((
        r.checks,
        r.failures
            .into_iter()
            .map(|f| (f.check.to_string(), f.seed, f.detail))
            .collect(),
    ))
}

#[pymodule]
pub fn co4(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRegime>()?;
    m.add_function(wrap_pyfunction!(softmax_row, m)?)?;
    m.add_function(wrap_pyfunction!(overload_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(classify_regime, m)?)?;
    m.add_function(wrap_pyfunction!(mod_transfer, m)?)?;
    m.add_function(wrap_pyfunction!(active_precision, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_attention, m)?)?;
    m.add_function(wrap_pyfunction!(gated_attention, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("SHIPPED_CONFIG", harness::SHIPPED_CONFIG)?;
    Ok(())
}
