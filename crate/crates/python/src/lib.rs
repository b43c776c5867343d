//! Python bindings. Structured results (equilibria, simulations, reports) come
//! back as plain dicts decoded from the library's JSON form.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use relayecon::equilibrium::{
    self, DensityBracket, DEFAULT_GRID_POINTS, DEFAULT_SCALING_DENSITIES,
};
use relayecon::regimes;
use relayecon::sim::{self, SimConfig};
use relayecon::{
    ConnectionKind, CostFunction, CostMode, Error, ModelParams, RadioParams, Regime, RelayDecision,
};

create_exception!(
    relayecon,
    ModelFinding,
    PyException,
    "The solver found no crossing or a boundary optimum."
);

fn to_py(e: Error) -> PyErr {
    if e.is_model_finding() {
        ModelFinding::new_err(e.to_string())
    } else if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_regime(name: &str) -> PyResult<Regime> {
    name.parse().map_err(PyValueError::new_err)
}

fn parse_mode(name: &str) -> PyResult<CostMode> {
    match name.to_ascii_lowercase().as_str() {
        "direct" => Ok(CostMode::Direct),
        "full_peering" | "peering" => Ok(CostMode::FullPeering),
        "skip_one" | "leapfrog" => Ok(CostMode::SkipOne),
        _ => Err(PyValueError::new_err(format!(
            "unknown cost mode `{name}` (expected direct, full_peering or skip_one)"
        ))),
    }
}

/// Round-trips a serializable value through JSON into Python objects.
fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "ModelParams", module = "relayecon")]
struct PyModelParams {
    inner: ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (n=10.0, d_max=1.0, v=10.0, u=2.0, w=0.01, z=0.99, cost_a=1.0, cost_beta=2.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: f64,
        d_max: f64,
        v: f64,
        u: f64,
        w: f64,
        z: f64,
        cost_a: f64,
        cost_beta: f64,
    ) -> PyResult<Self> {
        let inner = ModelParams {
            n,
            d_max,
            v,
            u,
            w,
            z,
            cost: CostFunction::new(cost_a, cost_beta),
        }
        .validate()
        .map_err(|e| to_py(e.into()))?;
        Ok(PyModelParams { inner })
    }

    #[getter]
    fn n(&self) -> f64 {
        self.inner.n
    }

    #[setter]
    fn set_n(&mut self, value: f64) {
        self.inner.n = value;
    }

    #[getter]
    fn d_max(&self) -> f64 {
        self.inner.d_max
    }

    #[setter]
    fn set_d_max(&mut self, value: f64) {
        self.inner.d_max = value;
    }

    #[getter]
    fn v(&self) -> f64 {
        self.inner.v
    }

    #[setter]
    fn set_v(&mut self, value: f64) {
        self.inner.v = value;
    }

    #[getter]
    fn u(&self) -> f64 {
        self.inner.u
    }

    #[setter]
    fn set_u(&mut self, value: f64) {
        self.inner.u = value;
    }

    #[getter]
    fn w(&self) -> f64 {
        self.inner.w
    }

    #[setter]
    fn set_w(&mut self, value: f64) {
        self.inner.w = value;
    }

    #[getter]
    fn z(&self) -> f64 {
        self.inner.z
    }

    #[setter]
    fn set_z(&mut self, value: f64) {
        self.inner.z = value;
    }

    #[getter]
    fn cost_a(&self) -> f64 {
        self.inner.cost.a
    }

    #[setter]
    fn set_cost_a(&mut self, value: f64) {
        self.inner.cost.a = value;
    }

    #[getter]
    fn cost_beta(&self) -> f64 {
        self.inner.cost.beta
    }

    #[setter]
    fn set_cost_beta(&mut self, value: f64) {
        self.inner.cost.beta = value;
    }

    /// Raises ValueError naming the first violated assumption.
    fn validate(&self) -> PyResult<()> {
        self.inner
            .validate()
            .map(|_| ())
            .map_err(|e| to_py(e.into()))
    }

    fn with_density(&self, n: f64) -> Self {
        PyModelParams {
            inner: self.inner.with_density(n),
        }
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = ModelParams::from_json_str(text).map_err(to_py)?;
        Ok(PyModelParams {
            inner: inner.validate().map_err(|e| to_py(e.into()))?,
        })
    }

    fn to_kv(&self) -> String {
        self.inner.to_kv_string()
    }

    #[staticmethod]
    fn from_kv(text: &str) -> PyResult<Self> {
        let inner = ModelParams::from_kv_str(text).map_err(to_py)?;
        Ok(PyModelParams {
            inner: inner.validate().map_err(|e| to_py(e.into()))?,
        })
    }

    fn cost(&self, d: f64) -> f64 {
        self.inner.cost_of(d)
    }

    fn intermediate_count(&self, d: f64) -> PyResult<f64> {
        self.inner.intermediate_count(d).map_err(to_py)
    }

    fn hop_distance(&self, d: f64) -> PyResult<f64> {
        self.inner.hop_distance(d).map_err(to_py)
    }

    fn nodes_within(&self, d: f64) -> PyResult<f64> {
        self.inner.nodes_within(d).map_err(to_py)
    }

    fn reachable_peers(&self) -> f64 {
        self.inner.reachable_peers()
    }

    fn connect_probability(&self, peer_count: f64) -> PyResult<f64> {
        self.inner.connect_probability(peer_count).map_err(to_py)
    }

    fn distance_cdf(&self, d: f64) -> PyResult<f64> {
        self.inner.distance_cdf(d).map_err(to_py)
    }

    fn distance_pdf(&self, d: f64) -> PyResult<f64> {
        self.inner.distance_pdf(d).map_err(to_py)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(n={:?}, d_max={:?}, v={:?}, u={:?}, w={:?}, z={:?}, cost_a={:?}, cost_beta={:?})",
            p.n, p.d_max, p.v, p.u, p.w, p.z, p.cost.a, p.cost.beta
        )
    }
}

/// Expected utilities by role for one regime, as a dict.
#[pyfunction]
fn utilities(py: Python<'_>, params: &PyModelParams, regime: &str) -> PyResult<Py<PyAny>> {
    let u = regimes::utilities(&params.inner, parse_regime(regime)?).map_err(to_py)?;
    to_object(py, &u)
}

#[pyfunction]
fn social_cost(params: &PyModelParams, d: f64, mode: &str) -> PyResult<f64> {
    regimes::social_cost(&params.inner, d, parse_mode(mode)?).map_err(to_py)
}

#[pyfunction]
fn value_added(params: &PyModelParams, d: f64) -> PyResult<f64> {
    regimes::value_added(&params.inner, d).map_err(to_py)
}

#[pyfunction]
fn originator_savings(params: &PyModelParams, d: f64) -> PyResult<f64> {
    regimes::originator_savings(&params.inner, d).map_err(to_py)
}

#[pyfunction]
fn competitive_price(params: &PyModelParams, d: f64) -> PyResult<f64> {
    regimes::competitive_price(&params.inner, d).map_err(to_py)
}

#[pyfunction]
fn price_bounds(params: &PyModelParams, d: f64) -> PyResult<(f64, f64)> {
    regimes::price_bounds(&params.inner, d).map_err(to_py)
}

#[pyfunction]
fn leapfrog_threshold(params: &PyModelParams, d: f64) -> PyResult<f64> {
    regimes::leapfrog_threshold(&params.inner, d).map_err(to_py)
}

#[pyfunction]
fn leapfrog_profitable(params: &PyModelParams, d: f64, price: f64) -> PyResult<bool> {
    regimes::leapfrog_profitable(&params.inner, d, price).map_err(to_py)
}

/// `("DIRECT" | "PEER", net_utility)`.
#[pyfunction]
fn originator_choice(params: &PyModelParams, d: f64, price: f64) -> PyResult<(&'static str, f64)> {
    let c = regimes::originator_choice(&params.inner, d, price).map_err(to_py)?;
    let kind = match c.kind {
        ConnectionKind::Direct => "DIRECT",
        ConnectionKind::Peer => "PEER",
    };
    Ok((kind, c.net_utility))
}

#[pyfunction]
fn intermediate_best_response(
    params: &PyModelParams,
    d: f64,
    price: f64,
) -> PyResult<&'static str> {
    Ok(
        match regimes::intermediate_best_response(&params.inner, d, price).map_err(to_py)? {
            RelayDecision::Accept => "ACCEPT",
            RelayDecision::Refuse => "REFUSE",
        },
    )
}

#[pyfunction]
fn total_eu(params: &PyModelParams, n: f64, regime: &str) -> PyResult<f64> {
    equilibrium::total_eu(&params.inner, n, parse_regime(regime)?).map_err(to_py)
}

fn bracket_for(
    params: &ModelParams,
    n_lo: Option<f64>,
    n_hi: Option<f64>,
    grid_points: usize,
) -> PyResult<DensityBracket> {
    let base = match (n_lo, n_hi) {
        (Some(lo), Some(hi)) => DensityBracket::new(lo, hi),
        (None, None) => DensityBracket::auto(params).map_err(to_py)?,
        _ => return Err(PyValueError::new_err("give both n_lo and n_hi, or neither")),
    };
    Ok(DensityBracket {
        grid_points,
        ..base
    })
}

#[pyfunction]
#[pyo3(signature = (params, regime, n_lo=None, n_hi=None, grid_points=DEFAULT_GRID_POINTS))]
fn free_entry_density(
    py: Python<'_>,
    params: &PyModelParams,
    regime: &str,
    n_lo: Option<f64>,
    n_hi: Option<f64>,
    grid_points: usize,
) -> PyResult<Py<PyAny>> {
    let bracket = bracket_for(&params.inner, n_lo, n_hi, grid_points)?;
    let result = equilibrium::free_entry_density(&params.inner, parse_regime(regime)?, &bracket)
        .map_err(to_py)?;
    to_object(py, &result)
}

#[pyfunction]
#[pyo3(signature = (params, n_lo=None, n_hi=None, grid_points=DEFAULT_GRID_POINTS))]
fn club_optimal_density(
    py: Python<'_>,
    params: &PyModelParams,
    n_lo: Option<f64>,
    n_hi: Option<f64>,
    grid_points: usize,
) -> PyResult<Py<PyAny>> {
    let bracket = bracket_for(&params.inner, n_lo, n_hi, grid_points)?;
    let result = equilibrium::club_optimal_density(&params.inner, &bracket).map_err(to_py)?;
    to_object(py, &result)
}

#[pyfunction]
#[pyo3(signature = (params, regime, densities=None))]
fn congestion_scaling_exponent(
    params: &PyModelParams,
    regime: &str,
    densities: Option<Vec<f64>>,
) -> PyResult<f64> {
    let densities = densities.unwrap_or_else(|| DEFAULT_SCALING_DENSITIES.to_vec());
    equilibrium::congestion_scaling_exponent(&params.inner, parse_regime(regime)?, &densities)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (params, n_lo=None, n_hi=None, grid_points=DEFAULT_GRID_POINTS))]
fn compare_regimes(
    py: Python<'_>,
    params: &PyModelParams,
    n_lo: Option<f64>,
    n_hi: Option<f64>,
    grid_points: usize,
) -> PyResult<Py<PyAny>> {
    let bracket = bracket_for(&params.inner, n_lo, n_hi, grid_points)?;
    let report = equilibrium::compare_regimes(&params.inner, &bracket).map_err(to_py)?;
    to_object(py, &report)
}

fn sim_config(
    params: &PyModelParams,
    regime: &str,
    side: usize,
    trials: usize,
    seed: u64,
) -> PyResult<SimConfig> {
    Ok(SimConfig {
        side,
        params: params.inner,
        regime: parse_regime(regime)?,
        trials,
        seed,
    })
}

/// One simulated instant over `trials` independent demand draws.
#[pyfunction]
#[pyo3(signature = (params, regime, side=40, trials=200, seed=7))]
fn simulate(
    py: Python<'_>,
    params: &PyModelParams,
    regime: &str,
    side: usize,
    trials: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let config = sim_config(params, regime, side, trials, seed)?;
    let outcome = py.detach(|| sim::run_instant(&config)).map_err(to_py)?;
    to_object(py, &outcome)
}

#[pyfunction]
#[pyo3(signature = (params, regime, side=40, trials=200, seed=7))]
fn estimate_vs_analytic(
    py: Python<'_>,
    params: &PyModelParams,
    regime: &str,
    side: usize,
    trials: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let config = sim_config(params, regime, side, trials, seed)?;
    let comparison = py
        .detach(|| sim::estimate_vs_analytic(&config))
        .map_err(to_py)?;
    to_object(py, &comparison)
}

#[pyfunction]
fn shannon_capacity(snr: f64) -> PyResult<f64> {
    relayecon::shannon_capacity(snr).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (alpha=1.0, bandwidth_total=1e6, user_bit_rate=1e4))]
fn channels_per_cell(alpha: f64, bandwidth_total: f64, user_bit_rate: f64) -> PyResult<f64> {
    let radio = RadioParams {
        alpha,
        bandwidth_total,
        user_bit_rate,
        ..RadioParams::default()
    };
    relayecon::channels_per_cell(&radio).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (k, carrier_frequency, exponent, d))]
fn path_loss(k: f64, carrier_frequency: f64, exponent: f64, d: f64) -> PyResult<f64> {
    let radio = RadioParams {
        path_loss_constant: k,
        carrier_frequency,
        path_loss_exponent: exponent,
        ..RadioParams::default()
    };
    relayecon::path_loss(&radio, d).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "relayecon")]
pub fn relayecon_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add("ModelFinding", m.py().get_type::<ModelFinding>())?;
    m.add("REGIMES", Regime::ALL.map(Regime::as_str).to_vec())?;
    m.add_function(wrap_pyfunction!(utilities, m)?)?;
    m.add_function(wrap_pyfunction!(social_cost, m)?)?;
    m.add_function(wrap_pyfunction!(value_added, m)?)?;
    m.add_function(wrap_pyfunction!(originator_savings, m)?)?;
    m.add_function(wrap_pyfunction!(competitive_price, m)?)?;
    m.add_function(wrap_pyfunction!(price_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(leapfrog_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(leapfrog_profitable, m)?)?;
    m.add_function(wrap_pyfunction!(originator_choice, m)?)?;
    m.add_function(wrap_pyfunction!(intermediate_best_response, m)?)?;
    m.add_function(wrap_pyfunction!(total_eu, m)?)?;
    m.add_function(wrap_pyfunction!(free_entry_density, m)?)?;
    m.add_function(wrap_pyfunction!(club_optimal_density, m)?)?;
    m.add_function(wrap_pyfunction!(congestion_scaling_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(compare_regimes, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_vs_analytic, m)?)?;
    m.add_function(wrap_pyfunction!(shannon_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(channels_per_cell, m)?)?;
    m.add_function(wrap_pyfunction!(path_loss, m)?)?;
    Ok(())
}
