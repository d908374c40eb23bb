//! Python bindings. Every function takes the text of a scenario file (TOML or
//! JSON); tables come back as CSV text in the same layout as the CLI writes.

use finsler_focal::cut::DistanceOracle;
use finsler_focal::focal::{detect_focal_times, focal_scan as scan, focal_time};
use finsler_focal::jacobi::JacobiFrame;
use finsler_focal::report::{cut_csv, focal_csv, lambda_csv};
use finsler_focal::scenario::{Scenario, SCENARIO_SCHEMA};
use finsler_focal::verify::{run_suite, Suite};
use finsler_focal::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    if e.is_schema() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn load(text: &str) -> PyResult<Scenario> {
    let sc = Scenario::parse(text).map_err(py_err)?;
    sc.validate().map_err(py_err)?;
    Ok(sc)
}

/// Focal scan; returns `(focal_csv, lambdas_csv)`.
#[pyfunction]
fn focal_scan(py: Python<'_>, scenario: &str) -> PyResult<(String, String)> {
    let sc = load(scenario)?;
    py.detach(|| {
        let b = sc.bundle()?;
        let s = scan(&b, &sc.rays()?, &sc.focal_settings())?;
        let d = b.system().coord_dim();
        Ok((focal_csv(&s, b.chart_dim(), d)?, lambda_csv(&s, b.chart_dim())?))
    })
    .map_err(py_err)
}

/// Focal times `λ_1..λ_j` along the ray with normal parameter `u`.
#[pyfunction]
fn focal_times(py: Python<'_>, scenario: &str, u: Vec<f64>, j: usize) -> PyResult<Vec<f64>> {
    let sc = load(scenario)?;
    py.detach(|| {
        let b = sc.bundle()?;
        let t_max = sc.scan.t_max;
        let frame = JacobiFrame::new(&b, &u, t_max)?;
        let zeros = detect_focal_times(&frame, t_max, sc.tolerances.time)?;
        Ok((1..=j).map(|k| focal_time(&zeros, k)).collect())
    })
    .map_err(py_err)
}

/// Cut scan; returns the cut table.
#[pyfunction]
fn cut_scan(py: Python<'_>, scenario: &str) -> PyResult<String> {
    let sc = load(scenario)?;
    py.detach(|| {
        let b = sc.bundle()?;
        let cuts = DistanceOracle::new(&b, sc.cut_settings())?.cut_scan(&sc.rays()?)?;
        cut_csv(&cuts, b.chart_dim(), b.system().coord_dim())
    })
    .map_err(py_err)
}

/// `d(N, q)`.
#[pyfunction]
fn distance(py: Python<'_>, scenario: &str, point: Vec<f64>) -> PyResult<f64> {
    let sc = load(scenario)?;
    py.detach(|| {
        let b = sc.bundle()?;
        Ok(DistanceOracle::new(&b, sc.cut_settings())?
            .distance_to_point(&point)?
            .distance)
    })
    .map_err(py_err)
}

/// Runs a verification suite; returns the report as JSON.
#[pyfunction]
fn verify(py: Python<'_>, scenario: &str, suite: &str) -> PyResult<String> {
    let sc = load(scenario)?;
    let suite = Suite::parse(suite).map_err(py_err)?;
    let rep = py.detach(|| run_suite(&sc, suite)).map_err(py_err)?;
    serde_json::to_string(&rep).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyfunction]
fn scenario_schema() -> &'static str {
    SCENARIO_SCHEMA
}

#[pymodule]
fn finsler_focal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(focal_scan, m)?)?;
    m.add_function(wrap_pyfunction!(focal_times, m)?)?;
    m.add_function(wrap_pyfunction!(cut_scan, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_schema, m)?)?;
    Ok(())
}
