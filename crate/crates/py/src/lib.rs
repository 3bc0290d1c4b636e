//! Python bindings: screening, calibration, proportion estimation and the
//! simulation drivers. Statistics are passed as sequences of floats.

use fnc_core::calibration::{self, NullEnsemble};
use fnc_core::proportion;
use fnc_core::reproduce::{self, RunScale};
use fnc_core::screening::{self, Method, SSource};
use fnc_core::simlab::covariance::CovarianceModel;
use fnc_core::simlab::experiment::{run_experiment as run_experiment_core, ExperimentConfig};
use fnc_core::statistic::{Scale, Sidedness, StatisticVector};
use fnc_core::twostage::{run_two_stage as run_two_stage_core, TwoStageConfig};
use fnc_core::FncError;
use pyo3::create_exception;
use pyo3::exceptions::{PyValueError, PyRuntimeError};
use pyo3::prelude::*;

create_exception!(fnc, NoDetectableSignalError, PyValueError, "The estimated signal proportion is zero.");
create_exception!(fnc, DecompositionError, PyRuntimeError, "The covariance matrix could not be factored.");

fn to_py(e: FncError) -> PyErr {
    match e {
        FncError::NoDetectableSignal => NoDetectableSignalError::new_err(e.to_string()),
        FncError::Decomposition(_) => DecompositionError::new_err(e.to_string()),
        FncError::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn sidedness(sided: &str) -> PyResult<Sidedness> {
    match sided {
        "one" => Ok(Sidedness::OneSided),
        "two" => Ok(Sidedness::TwoSided),
        other => Err(PyValueError::new_err(format!("sided must be 'one' or 'two', got {other:?}"))),
    }
}

fn statistics(values: Vec<f64>, scale: &str, sided: &str) -> PyResult<StatisticVector> {
    let scale = match scale {
        "p" => Scale::P,
        "z" => Scale::Z,
        other => return Err(PyValueError::new_err(format!("scale must be 'p' or 'z', got {other:?}"))),
    };
    StatisticVector::new(values, scale, sidedness(sided)?).map_err(to_py)
}

/// Calibrated bounding constants for the signal-proportion estimator.
#[pyclass(name = "BoundingSequences", module = "fnc", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBounds(calibration::BoundingSequences);

#[pymethods]
impl PyBounds {
    /// Constants supplied directly.
    #[staticmethod]
    fn manual(m: usize, c_half: f64, c_one: f64) -> PyResult<Self> {
        calibration::BoundingSequences::manual(m, c_half, c_one).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m
    }
    #[getter]
    fn n_sets(&self) -> usize {
        self.0.n_sets
    }
    #[getter]
    fn quantile_level(&self) -> f64 {
        self.0.quantile_level
    }
    #[getter]
    fn c_half(&self) -> f64 {
        self.0.c_half
    }
    #[getter]
    fn c_one(&self) -> f64 {
        self.0.c_one
    }
    #[getter]
    fn seed(&self) -> Option<u64> {
        self.0.seed
    }

    fn __repr__(&self) -> String {
        format!(
            "BoundingSequences(m={}, n_sets={}, c_half={}, c_one={})",
            self.0.m, self.0.n_sets, self.0.c_half, self.0.c_one
        )
    }
}

/// Outcome of a selection rule.
#[pyclass(name = "Selection", module = "fnc", frozen, skip_from_py_object)]
struct PySelection(screening::SelectionResult);

#[pymethods]
impl PySelection {
    /// Selected positions, most significant first.
    #[getter]
    fn selected(&self) -> Vec<usize> {
        self.0.selected_indices.clone()
    }
    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }
    #[getter]
    fn threshold_z(&self) -> f64 {
        self.0.threshold_z
    }
    #[getter]
    fn fnp_hat_at_k(&self) -> Option<f64> {
        self.0.fnp_hat_at_k
    }
    #[getter]
    fn level(&self) -> f64 {
        self.0.level
    }
    #[getter]
    fn s_used(&self) -> Option<usize> {
        self.0.s_used
    }
    #[getter]
    fn s_clipped(&self) -> bool {
        self.0.s_clipped
    }
    #[getter]
    fn method(&self) -> &'static str {
        match self.0.method {
            Method::Fnc => "fnc",
            Method::Bh => "bh",
            Method::Bonferroni => "bonferroni",
        }
    }

    fn __len__(&self) -> usize {
        self.0.k
    }

    fn __repr__(&self) -> String {
        format!("Selection(method={:?}, k={}, level={})", self.method(), self.0.k, self.0.level)
    }
}

/// Estimated signal proportion.
#[pyclass(name = "ProportionEstimate", module = "fnc", frozen, skip_from_py_object)]
struct PyEstimate(proportion::ProportionEstimate);

#[pymethods]
impl PyEstimate {
    #[getter]
    fn pi_hat(&self) -> f64 {
        self.0.pi_hat
    }
    #[getter]
    fn pi_half(&self) -> f64 {
        self.0.pi_half
    }
    #[getter]
    fn pi_one(&self) -> f64 {
        self.0.pi_one
    }
    #[getter]
    fn s_hat(&self) -> usize {
        self.0.s_hat
    }
    #[getter]
    fn argmax_index(&self) -> usize {
        self.0.argmax_index
    }

    fn __repr__(&self) -> String {
        format!("ProportionEstimate(pi_hat={}, s_hat={})", self.0.pi_hat, self.0.s_hat)
    }
}

/// Estimated false negative proportion after selecting the top `j` of `m`.
#[pyfunction]
fn fnp_hat(j: usize, p: f64, s: usize, m: usize) -> PyResult<f64> {
    screening::fnp_hat(j, p, s, m).map_err(to_py)
}

/// FNC screening with a known number of signals.
#[pyfunction]
#[pyo3(signature = (values, s, beta, scale = "p", sided = "one"))]
fn fnc_screen(py: Python<'_>, values: Vec<f64>, s: usize, beta: f64, scale: &str, sided: &str) -> PyResult<PySelection> {
    let stats = statistics(values, scale, sided)?;
    py.detach(|| screening::fnc_screen(&stats, s, beta, SSource::Known)).map(PySelection).map_err(to_py)
}

/// FNC screening with the number of signals estimated from `bounds`.
/// Raises `NoDetectableSignalError` when the estimate is zero.
#[pyfunction]
#[pyo3(signature = (values, bounds, beta, scale = "p", sided = "one"))]
fn fnc_screen_estimated(
    py: Python<'_>,
    values: Vec<f64>,
    bounds: &PyBounds,
    beta: f64,
    scale: &str,
    sided: &str,
) -> PyResult<(PySelection, PyEstimate)> {
    let stats = statistics(values, scale, sided)?;
    let (sel, est) = py.detach(|| screening::fnc_screen_estimated(&stats, &bounds.0, beta)).map_err(to_py)?;
    Ok((PySelection(sel), PyEstimate(est)))
}

#[pyfunction]
#[pyo3(signature = (values, bounds, scale = "p", sided = "one"))]
fn estimate_proportion(values: Vec<f64>, bounds: &PyBounds, scale: &str, sided: &str) -> PyResult<PyEstimate> {
    let stats = statistics(values, scale, sided)?;
    proportion::estimate_proportion(&stats, &bounds.0).map(PyEstimate).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (values, alpha, scale = "p", sided = "one"))]
fn bh_fdr(values: Vec<f64>, alpha: f64, scale: &str, sided: &str) -> PyResult<PySelection> {
    let stats = statistics(values, scale, sided)?;
    screening::bh_fdr(&stats, alpha).map(PySelection).map_err(to_py)
}

/// Bonferroni at `alpha / m_eff`; `m_eff` defaults to the number of statistics.
#[pyfunction]
#[pyo3(signature = (values, alpha, m_eff = None, scale = "p", sided = "one"))]
fn bonferroni(values: Vec<f64>, alpha: f64, m_eff: Option<usize>, scale: &str, sided: &str) -> PyResult<PySelection> {
    let stats = statistics(values, scale, sided)?;
    let m_eff = m_eff.unwrap_or(stats.len());
    screening::bonferroni(&stats, alpha, m_eff).map(PySelection).map_err(to_py)
}

/// Calibrate from a covariance model description such as `"ar:0.2"`.
#[pyfunction]
#[pyo3(signature = (model, m, n_sets = 1000, seed = 0, sided = "one"))]
fn calibrate(py: Python<'_>, model: &str, m: usize, n_sets: usize, seed: u64, sided: &str) -> PyResult<PyBounds> {
    let model = CovarianceModel::parse(model, m).map_err(to_py)?;
    let sided = sidedness(sided)?;
    py.detach(|| calibration::calibrate_model(&model, n_sets, seed, sided)).map(PyBounds).map_err(to_py)
}

/// Calibrate from null p-value sets, one per row.
#[pyfunction]
fn calibrate_ensemble(sets: Vec<Vec<f64>>) -> PyResult<PyBounds> {
    let ensemble = NullEnsemble::new(sets, calibration::EnsembleProvenance::External { path: "<python>".into() })
        .map_err(to_py)?;
    calibration::bounding_sequences(&ensemble).map(PyBounds).map_err(to_py)
}

/// Run a replicated experiment from a JSON configuration; returns the summary as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let config: ExperimentConfig = serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let summary = py.detach(|| run_experiment_core(&config)).map_err(to_py)?;
    serde_json::to_string(&summary).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Run the two-stage simulation from a JSON configuration; returns the result as JSON.
#[pyfunction]
fn run_two_stage(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let config: TwoStageConfig = serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let result = py.detach(|| run_two_stage_core(&config)).map_err(to_py)?;
    serde_json::to_string(&result).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// A benchmark table as `(columns, rows)` of strings.
#[pyfunction]
#[pyo3(signature = (table, scale = "desk", seed = 0))]
fn reproduce_table(py: Python<'_>, table: u8, scale: &str, seed: u64) -> PyResult<(Vec<String>, Vec<Vec<String>>)> {
    let scale = match scale {
        "desk" => RunScale::Desk,
        "full" => RunScale::Full,
        other => return Err(PyValueError::new_err(format!("scale must be 'desk' or 'full', got {other:?}"))),
    };
    let t = py.detach(|| reproduce::table(table, scale, seed)).map_err(to_py)?;
    Ok((t.columns, t.rows))
}

#[pymodule]
fn fnc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("NoDetectableSignalError", m.py().get_type::<NoDetectableSignalError>())?;
    m.add("DecompositionError", m.py().get_type::<DecompositionError>())?;
    m.add_class::<PyBounds>()?;
    m.add_class::<PySelection>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(fnp_hat, m)?)?;
    m.add_function(wrap_pyfunction!(fnc_screen, m)?)?;
    m.add_function(wrap_pyfunction!(fnc_screen_estimated, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_proportion, m)?)?;
    m.add_function(wrap_pyfunction!(bh_fdr, m)?)?;
    m.add_function(wrap_pyfunction!(bonferroni, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_two_stage, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce_table, m)?)?;
    Ok(())
}
