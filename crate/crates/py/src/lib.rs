//! Python bindings for the coldstart core: calibration formulas, the
//! 2x2 game, Monte-Carlo oracles, the trust ledger and the simulator.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use coldstart::config::RunConfig;
use coldstart::game_model::{self, EliminationOutcome, RequesterStrategy, ResponderStrategy};
use coldstart::oracle;
use coldstart::sim_engine::{self, CycleMetrics, SimError};
use coldstart::trust_ledger::{self, LedgerConfig};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sim_error(e: SimError) -> PyErr {
    match e {
        SimError::Io(_) | SimError::Csv(_) => PyIOError::new_err(e.to_string()),
        other => value_error(other),
    }
}

fn requester(label: &str) -> PyResult<RequesterStrategy> {
    RequesterStrategy::ALL
        .into_iter()
        .find(|s| s.label() == label)
        .ok_or_else(|| value_error(format!("unknown requester strategy `{label}` (expected BT or R)")))
}

fn responder(label: &str) -> PyResult<ResponderStrategy> {
    ResponderStrategy::ALL
        .into_iter()
        .find(|s| s.label() == label)
        .ok_or_else(|| value_error(format!("unknown responder strategy `{label}` (expected T or L)")))
}

/// Payoff matrix of the requester/responder game. Rows are "BT" and "R",
/// columns "T" and "L".
#[pyclass(frozen, name = "GameMatrix")]
struct PyGameMatrix(game_model::GameMatrix);

#[pymethods]
impl PyGameMatrix {
    /// `(requester_payoff, responder_payoff)` for one cell.
    fn cell(&self, row: &str, col: &str) -> PyResult<(f64, f64)> {
        let c = self.0.cell(requester(row)?, responder(col)?);
        Ok((c.requester, c.responder))
    }

    /// Iterated weak-dominance elimination. Returns `(row, col)` for a
    /// unique survivor, otherwise `(rows, cols)` lists of survivors.
    fn eliminate(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        match game_model::pure_strategy_elimination(&self.0) {
            EliminationOutcome::Unique(r, c) => Ok((r.label(), c.label()).into_pyobject(py)?.into_any().unbind()),
            EliminationOutcome::Tie { requester, responder } => {
                let rows: Vec<&str> = requester.iter().map(|s| s.label()).collect();
                let cols: Vec<&str> = responder.iter().map(|s| s.label()).collect();
                Ok((rows, cols).into_pyobject(py)?.into_any().unbind())
            }
        }
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

#[pyclass(frozen, name = "GameParams")]
struct PyGameParams(game_model::GameParams);

#[pymethods]
impl PyGameParams {
    #[new]
    #[pyo3(signature = (n, j, p, k, profit = 10.0, cost = 1.0))]
    fn new(n: u32, j: u32, p: f64, k: f64, profit: f64, cost: f64) -> PyResult<Self> {
        game_model::GameParams::new(n, j, p, k, profit, cost)
            .map(Self)
            .map_err(value_error)
    }

    #[getter]
    fn n(&self) -> u32 {
        self.0.n
    }
    #[getter]
    fn j(&self) -> u32 {
        self.0.j
    }
    #[getter]
    fn p(&self) -> f64 {
        self.0.p
    }
    #[getter]
    fn k(&self) -> f64 {
        self.0.k
    }
    #[getter]
    fn profit(&self) -> f64 {
        self.0.profit
    }
    #[getter]
    fn cost(&self) -> f64 {
        self.0.cost
    }

    fn matrix(&self) -> PyGameMatrix {
        PyGameMatrix(game_model::build_game_matrix(&self.0))
    }

    fn is_lying_dominated(&self) -> bool {
        game_model::is_lying_dominated(&self.0)
    }

    fn __repr__(&self) -> String {
        let g = &self.0;
        format!(
            "GameParams(n={}, j={}, p={}, k={}, profit={}, cost={})",
            g.n, g.j, g.p, g.k, g.profit, g.cost
        )
    }
}

#[pyclass(frozen, get_all, name = "CalibrationReport")]
struct PyCalibrationReport {
    n: u32,
    j: u32,
    p: f64,
    epsilon: f64,
    k_min_dominance: f64,
    k_min_descending: f64,
    recommended_k: f64,
    z_at_recommended_k: f64,
    liar_per_round_at_recommended_k: f64,
    threshold: u32,
}

#[pyclass(frozen, get_all, name = "McResult")]
struct PyMcResult {
    mean: f64,
    std_error: f64,
    trials: u64,
}

impl From<oracle::McResult> for PyMcResult {
    fn from(r: oracle::McResult) -> Self {
        Self {
            mean: r.mean,
            std_error: r.std_error,
            trials: r.trials,
        }
    }
}

impl PyMcResult {
    fn inner(&self) -> oracle::McResult {
        oracle::McResult {
            mean: self.mean,
            std_error: self.std_error,
            trials: self.trials,
        }
    }
}

#[pymethods]
impl PyMcResult {
    fn agrees_with(&self, expected: f64) -> bool {
        self.inner().agrees_with(expected)
    }

    fn z_score(&self, expected: f64) -> f64 {
        self.inner().z_score(expected)
    }

    fn __repr__(&self) -> String {
        format!("McResult(mean={}, std_error={}, trials={})", self.mean, self.std_error, self.trials)
    }
}

/// Per-peer trust scores with a floor, a service threshold and a penalty.
#[pyclass(name = "TrustLedger")]
struct PyTrustLedger(trust_ledger::TrustLedger);

#[pymethods]
impl PyTrustLedger {
    #[new]
    fn new(floor: f64, threshold: f64, penalty: f64) -> PyResult<Self> {
        let config = LedgerConfig::new(floor, threshold, penalty).map_err(value_error)?;
        trust_ledger::TrustLedger::new(config).map(Self).map_err(value_error)
    }

    /// Add a peer at the floor and return its id.
    fn register(&mut self) -> u32 {
        self.0.register().0
    }

    fn trust(&self, peer: u32) -> PyResult<f64> {
        self.0.trust(trust_ledger::PeerId(peer)).map_err(value_error)
    }

    fn credit(&mut self, peer: u32) -> PyResult<f64> {
        self.0.credit(trust_ledger::PeerId(peer)).map_err(value_error)
    }

    fn penalize(&mut self, peer: u32) -> PyResult<f64> {
        self.0.penalize(trust_ledger::PeerId(peer)).map_err(value_error)
    }

    fn passes_threshold(&self, peer: u32) -> PyResult<bool> {
        self.0.passes_threshold(trust_ledger::PeerId(peer)).map_err(value_error)
    }

    fn scores(&self) -> Vec<f64> {
        self.0.scores().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Per-cycle averages produced by a simulation run. Missing categories
/// are `None`.
#[pyclass(frozen, name = "MetricsSeries")]
struct PyMetricsSeries(sim_engine::MetricsSeries);

type Row = (u64, Option<f64>, Option<f64>, Option<f64>, Option<f64>, Option<f64>, u64);

fn row(r: &CycleMetrics) -> Row {
    (
        r.cycle,
        r.avg_trust_good,
        r.avg_trust_bad,
        r.avg_trust_liar,
        r.avg_trust_newcomer_good,
        r.success_rate,
        r.penalties,
    )
}

#[pymethods]
impl PyMetricsSeries {
    #[classattr]
    fn columns() -> Vec<&'static str> {
        sim_engine::METRICS_CSV_HEADER.to_vec()
    }

    /// One tuple per cycle, in `columns` order.
    fn rows(&self) -> Vec<Row> {
        self.0.rows.iter().map(row).collect()
    }

    fn to_csv(&self) -> String {
        self.0.to_csv_string()
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        sim_engine::MetricsSeries::read_csv(text.as_bytes())
            .map(Self)
            .map_err(sim_error)
    }

    #[pyo3(signature = (title = "Average trust value of peers"))]
    fn to_svg(&self, title: &str) -> String {
        coldstart::plot::render_svg(&self.0, title)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn liar_round_payoff_z(k: f64, j: u32) -> PyResult<f64> {
    game_model::liar_round_payoff_z(k, j).map_err(value_error)
}

#[pyfunction]
fn k_min_dominance(n: u32, j: u32, p: f64) -> PyResult<f64> {
    game_model::k_min_dominance(n, j, p).map_err(value_error)
}

#[pyfunction]
fn k_min_descending(j: u32, p: f64) -> PyResult<f64> {
    game_model::k_min_descending(j, p).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (j, p, margin = game_model::DEFAULT_K_MARGIN))]
fn recommended_k(j: u32, p: f64, margin: f64) -> PyResult<f64> {
    game_model::recommended_k(j, p, margin).map_err(value_error)
}

#[pyfunction]
fn expected_liar_per_round(p: f64, k: f64, j: u32) -> PyResult<f64> {
    game_model::expected_liar_per_round(p, k, j).map_err(value_error)
}

#[pyfunction]
fn truthful_trajectory(rounds: u64, n: u32) -> PyResult<f64> {
    game_model::truthful_trajectory(rounds, n).map_err(value_error)
}

#[pyfunction]
fn liar_trajectory(rounds: u64, p: f64, k: f64, j: u32) -> PyResult<f64> {
    game_model::liar_trajectory(rounds, p, k, j).map_err(value_error)
}

#[pyfunction]
fn escape_probability(j: u32, p: f64, t: u32) -> PyResult<f64> {
    game_model::escape_probability(j, p, t).map_err(value_error)
}

#[pyfunction]
fn recommend_threshold(j: u32, p: f64, epsilon: f64) -> PyResult<u32> {
    game_model::recommend_threshold(j, p, epsilon).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (n, j, p, epsilon = 0.01))]
fn calibrate(n: u32, j: u32, p: f64, epsilon: f64) -> PyResult<PyCalibrationReport> {
    let r = game_model::calibrate(n, j, p, epsilon).map_err(value_error)?;
    Ok(PyCalibrationReport {
        n: r.n,
        j: r.j,
        p: r.p,
        epsilon: r.epsilon,
        k_min_dominance: r.k_min_dominance,
        k_min_descending: r.k_min_descending,
        recommended_k: r.recommended_k,
        z_at_recommended_k: r.z_at_recommended_k,
        liar_per_round_at_recommended_k: r.liar_per_round_at_recommended_k,
        threshold: r.threshold,
    })
}

#[pyfunction]
#[pyo3(signature = (p, k, j, trials = 1_000_000, seed = 0))]
fn mc_liar_payoff(py: Python<'_>, p: f64, k: f64, j: u32, trials: u64, seed: u64) -> PyResult<PyMcResult> {
    py.detach(|| oracle::mc_liar_payoff(p, k, j, trials, seed))
        .map(PyMcResult::from)
        .map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (j, p, t, trials = 100_000, seed = 0))]
fn mc_escape_frequency(py: Python<'_>, j: u32, p: f64, t: u32, trials: u64, seed: u64) -> PyResult<PyMcResult> {
    py.detach(|| oracle::mc_escape_frequency(j, p, t, trials, seed))
        .map(PyMcResult::from)
        .map_err(value_error)
}

#[pyfunction]
fn enumerate_escape_probability(j: u32, p: f64, t: u32) -> PyResult<f64> {
    oracle::enumerate_escape_probability(j, p, t).map_err(value_error)
}

/// Run a simulation described by a config document (`key = value` lines).
/// Keyword arguments override keys of the same name.
#[pyfunction]
#[pyo3(signature = (config, **overrides))]
fn simulate(
    py: Python<'_>,
    config: &str,
    overrides: Option<&Bound<'_, pyo3::types::PyDict>>,
) -> PyResult<PyMetricsSeries> {
    let mut pairs = Vec::new();
    if let Some(dict) = overrides {
        for (key, value) in dict.iter() {
            pairs.push((key.extract::<String>()?, value.str()?.to_string()));
        }
    }
    let run = RunConfig::parse_with_overrides(config, pairs.iter().map(|(k, v)| (k.as_str(), v.clone())))
        .map_err(value_error)?;
    py.detach(|| sim_engine::run_simulation(run.sim))
        .map(PyMetricsSeries)
        .map_err(sim_error)
}

/// The desk-scale reference configuration as a config document.
#[pyfunction]
#[pyo3(signature = (seed = 1))]
fn desk_scale_config(seed: u64) -> String {
    coldstart::config::desk_scale_document(seed)
}

#[pymodule]
fn coldstart_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGameParams>()?;
    m.add_class::<PyGameMatrix>()?;
    m.add_class::<PyCalibrationReport>()?;
    m.add_class::<PyMcResult>()?;
    m.add_class::<PyTrustLedger>()?;
    m.add_class::<PyMetricsSeries>()?;
    m.add_function(wrap_pyfunction!(liar_round_payoff_z, m)?)?;
    m.add_function(wrap_pyfunction!(k_min_dominance, m)?)?;
    m.add_function(wrap_pyfunction!(k_min_descending, m)?)?;
    m.add_function(wrap_pyfunction!(recommended_k, m)?)?;
    m.add_function(wrap_pyfunction!(expected_liar_per_round, m)?)?;
    m.add_function(wrap_pyfunction!(truthful_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(liar_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(escape_probability, m)?)?;
    m.add_function(wrap_pyfunction!(recommend_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(mc_liar_payoff, m)?)?;
    m.add_function(wrap_pyfunction!(mc_escape_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_escape_probability, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(desk_scale_config, m)?)?;
    m.add("MIN_TRIALS", oracle::MIN_TRIALS)?;
    Ok(())
}
