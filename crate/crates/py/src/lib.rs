//! Python bindings. Structured values cross the boundary as JSON strings in
//! the same shape the command-line tool writes.

use collective::cli::{check_panels, ci_panels, estimate_panels, RunConfig};
use collective::elvis::{averaged_moment as tilt_moment, MomentPanel, OptimizerConfig};
use collective::household::{
    gapm_rts_upper_bound as gapm_bound, time_invariance_residual as residual, HouseholdPanel, DEFAULT_GRID_STEP,
};
use collective::pipeline::{construct_sample, load_panel, summarize as summarize_panels, PipelineConfig};
use collective::synth::{generate_population as generate, misspecification_demo as demo, PopulationSpec};
use collective::Error;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::Config(_) | Error::Spec(_) | Error::Json(_) | Error::Header(_) | Error::Malformed { .. } => {
            PyValueError::new_err(e.to_string())
        }
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_or_default<T: DeserializeOwned + Default>(text: Option<&str>) -> PyResult<T> {
    text.map(parse).transpose().map(Option::unwrap_or_default)
}

fn dump<T: Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn run_config(toml: Option<&str>) -> PyResult<RunConfig> {
    let cfg = match toml {
        Some(t) => RunConfig::from_toml(t).map_err(to_py)?,
        None => RunConfig::default(),
    };
    cfg.finalize().map_err(to_py)
}

/// One household panel in model units.
#[pyclass(name = "Panel", module = "pycollective", from_py_object)]
#[derive(Clone)]
struct PyPanel {
    inner: HouseholdPanel,
}

#[pymethods]
impl PyPanel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: HouseholdPanel = parse(text)?;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        dump(&self.inner)
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn periods(&self) -> usize {
        self.inner.periods()
    }

    /// Returns-to-scale interval consistent with profit maximisation, or `None`.
    fn rts_bound(&self) -> Option<(f64, f64)> {
        gapm_bound(&self.inner, DEFAULT_GRID_STEP).map(|r| (r.lo, r.hi))
    }

    fn time_invariance_residual(&self) -> PyResult<f64> {
        residual(&self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Panel(id={:?}, periods={})", self.inner.id, self.inner.periods())
    }
}

/// Synthetic population as JSON `{panels, truths, corners, attempts}`.
#[pyfunction]
#[pyo3(signature = (spec_json=None))]
fn generate_population(spec_json: Option<&str>) -> PyResult<String> {
    let spec: PopulationSpec = parse_or_default(spec_json)?;
    let pop = generate(&spec).map_err(to_py)?;
    dump(&serde_json::json!({
        "panels": pop.panels,
        "truths": pop.truths,
        "corners": pop.corners,
        "attempts": pop.attempts,
    }))
}

/// Reads a CSV and applies the sample rules; JSON `{panels, report}`.
#[pyfunction]
#[pyo3(signature = (path, pipeline_json=None))]
fn load_sample(path: &str, pipeline_json: Option<&str>) -> PyResult<String> {
    let cfg: PipelineConfig = parse_or_default(pipeline_json)?;
    let records = load_panel(path.as_ref()).map_err(to_py)?;
    let (panels, report) = construct_sample(&records, &cfg);
    dump(&serde_json::json!({ "panels": panels, "report": report }))
}

/// Summary statistics of a JSON list of panels; `None` when empty.
#[pyfunction]
#[pyo3(signature = (panels_json, pipeline_json=None))]
fn summarize(panels_json: &str, pipeline_json: Option<&str>) -> PyResult<Option<String>> {
    let panels: Vec<HouseholdPanel> = parse(panels_json)?;
    let cfg: PipelineConfig = parse_or_default(pipeline_json)?;
    summarize_panels(&panels, &cfg).map(|s| dump(&s)).transpose()
}

/// Per-household feasibility report for a JSON list of panels.
#[pyfunction]
#[pyo3(signature = (panels_json, config_toml=None))]
fn check(panels_json: &str, config_toml: Option<&str>) -> PyResult<String> {
    let panels: Vec<HouseholdPanel> = parse(panels_json)?;
    dump(&check_panels(&panels, &run_config(config_toml)?))
}

/// Runs the sampler on every panel and tests the model.
#[pyfunction]
#[pyo3(signature = (panels_json, config_toml=None))]
fn estimate(py: Python<'_>, panels_json: &str, config_toml: Option<&str>) -> PyResult<String> {
    let panels: Vec<HouseholdPanel> = parse(panels_json)?;
    let cfg = run_config(config_toml)?;
    let report = py.detach(|| estimate_panels(&panels, &cfg)).map_err(to_py)?;
    dump(&report)
}

/// Confidence set for the configured target.
#[pyfunction]
#[pyo3(signature = (panels_json, config_toml=None))]
fn confidence_interval(py: Python<'_>, panels_json: &str, config_toml: Option<&str>) -> PyResult<String> {
    let panels: Vec<HouseholdPanel> = parse(panels_json)?;
    let cfg = run_config(config_toml)?;
    let report = py.detach(|| ci_panels(&panels, &cfg)).map_err(to_py)?;
    dump(&report)
}

/// Tilted average of one household's moment draws.
#[pyfunction]
fn averaged_moment(draws: Vec<Vec<f64>>, gamma: Vec<f64>) -> PyResult<Vec<f64>> {
    tilt_moment(&draws, &gamma).map_err(to_py)
}

/// Test statistic from per-household moment draws `[household][draw][moment]`.
#[pyfunction]
#[pyo3(signature = (households, level=0.95))]
fn test_statistic(households: Vec<Vec<Vec<f64>>>, level: f64) -> PyResult<String> {
    let panel = MomentPanel::new(&households).map_err(to_py)?;
    dump(&panel.test_statistic(level, &OptimizerConfig::default()).map_err(to_py)?)
}

/// Spurious-infeasibility report of the no-shock restriction.
#[pyfunction]
#[pyo3(signature = (spec_json=None))]
fn misspecification_demo(spec_json: Option<&str>) -> PyResult<String> {
    let spec: PopulationSpec = parse_or_default(spec_json)?;
    let pop = generate(&spec).map_err(to_py)?;
    dump(&demo(&pop).map_err(to_py)?)
}

#[pymodule]
fn pycollective(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyPanel>()?;
    m.add_function(wrap_pyfunction!(generate_population, m)?)?;
    m.add_function(wrap_pyfunction!(load_sample, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_interval, m)?)?;
    m.add_function(wrap_pyfunction!(averaged_moment, m)?)?;
    m.add_function(wrap_pyfunction!(test_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(misspecification_demo, m)?)?;
    Ok(())
}
