//! Python bindings: graph families by source string, exact potential
//! quantities, and the configurable test harness.

use std::path::PathBuf;

use interlace::coupling;
use interlace::graph::KilledWeightedGraph;
use interlace::harness::config::{resolve_window, ExperimentConfig, GraphSource};
use interlace::harness::{execute, run_suite, StatReport, SuiteSettings};
use interlace::potential::Potential;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn to_py(e: interlace::Error) -> PyErr {
    match e {
        interlace::Error::Config(_)
        | interlace::Error::Parse { .. }
        | interlace::Error::UnknownOperation(_)
        | interlace::Error::InvalidGraph(_)
        | interlace::Error::InvalidParameter(_)
        | interlace::Error::UnknownVertex(_)
        | interlace::Error::EmptySet
        | interlace::Error::NotNested(..) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn graph(source: &str) -> PyResult<KilledWeightedGraph> {
    source.parse::<GraphSource>().and_then(|s| s.build()).map_err(to_py)
}

/// Vertex key: the coordinate tuple when the family has one, else the id.
fn key<'py>(py: Python<'py>, g: &KilledWeightedGraph, x: interlace::graph::VertexId) -> PyResult<Bound<'py, PyAny>> {
    let c = g.coordinate(x);
    if c.is_empty() {
        Ok(x.0.into_pyobject(py)?.into_any())
    } else if c.len() == 1 {
        Ok(c[0].into_pyobject(py)?.into_any())
    } else {
        Ok(pyo3::types::PyTuple::new(py, c)?.into_any())
    }
}

/// Number of vertices, edges `(u, v, weight)` and kill weights of a graph source.
#[pyfunction]
fn graph_summary<'py>(py: Python<'py>, source: &str) -> PyResult<Bound<'py, PyDict>> {
    let g = graph(source)?;
    let d = PyDict::new(py);
    d.set_item("vertices", g.vertex_count())?;
    d.set_item("edges", g.edges().to_vec())?;
    d.set_item("kill", g.kill_weights().to_vec())?;
    Ok(d)
}

/// Capacity, equilibrium measure and escape probabilities of a window.
#[pyfunction]
fn equilibrium<'py>(py: Python<'py>, source: &str, window: &str) -> PyResult<Bound<'py, PyDict>> {
    let g = graph(source)?;
    let k = resolve_window(&g, window).map_err(to_py)?;
    let eq = Potential::new(&g).equilibrium(&k).map_err(to_py)?;
    let measure = PyDict::new(py);
    let escape = PyDict::new(py);
    for x in k.iter() {
        measure.set_item(key(py, &g, x)?, eq.measure[x.0])?;
        escape.set_item(key(py, &g, x)?, eq.escape[x.0])?;
    }
    let d = PyDict::new(py);
    d.set_item("capacity", eq.capacity)?;
    d.set_item("measure", measure)?;
    d.set_item("escape", escape)?;
    Ok(d)
}

/// Hinge measure of a window as a dict `{(x, y): mass}`.
#[pyfunction]
fn hinge<'py>(py: Python<'py>, source: &str, window: &str) -> PyResult<Bound<'py, PyDict>> {
    let g = graph(source)?;
    let k = resolve_window(&g, window).map_err(to_py)?;
    let h = Potential::new(&g).hinge(&k).map_err(to_py)?;
    let d = PyDict::new(py);
    for (x, y, m) in h.entries() {
        d.set_item((key(py, &g, x)?, key(py, &g, y)?), m)?;
    }
    Ok(d)
}

/// `(exact, bound)` total variation between Poisson(λ) and Poisson(λ) + 1.
#[pyfunction]
fn poisson_shift_tv(lambda: f64) -> PyResult<(f64, f64)> {
    let t = coupling::poisson_shift_tv(lambda).map_err(to_py)?;
    Ok((t.exact, t.bound))
}

fn report_dict<'py>(py: Python<'py>, r: &StatReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", &r.name)?;
    d.set_item("estimate", r.estimate)?;
    d.set_item("std_error", r.std_error)?;
    d.set_item("reference", r.reference)?;
    d.set_item("reference_source", &r.reference_source)?;
    d.set_item("stat", r.z)?;
    d.set_item("rule", r.rule.to_string())?;
    d.set_item("pass", r.pass)?;
    d.set_item("samples", r.samples)?;
    d.set_item("seed", r.seed)?;
    d.set_item("wall_time", r.wall_time.as_secs_f64())?;
    Ok(d)
}

/// Run one harness operation. Keyword arguments are configuration keys,
/// e.g. `run("vacancy", graph="path2", window="0;1", samples=20000)`.
#[pyfunction]
#[pyo3(signature = (operation, **settings))]
fn run<'py>(py: Python<'py>, operation: &str, settings: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = ExperimentConfig::default();
    cfg.set("operation", operation).map_err(to_py)?;
    if let Some(s) = settings {
        for (k, v) in s.iter() {
            let k: String = k.extract()?;
            let v = v.str()?.to_string();
            cfg.set(&k, &v).map_err(to_py)?;
        }
    }
    cfg.validate().map_err(to_py)?;
    let out = py.detach(|| execute(&cfg)).map_err(to_py)?;
    let reports = PyList::empty(py);
    for r in &out.reports {
        reports.append(report_dict(py, r)?)?;
    }
    let artifacts = PyDict::new(py);
    for (name, text) in &out.artifacts {
        artifacts.set_item(name, text)?;
    }
    let d = PyDict::new(py);
    d.set_item("passed", out.passed())?;
    d.set_item("reports", reports)?;
    d.set_item("artifacts", artifacts)?;
    d.set_item("failures", out.failures.clone())?;
    Ok(d)
}

/// The acceptance battery; returns `[(id, title, pass, lines)]`.
#[pyfunction]
#[pyo3(signature = (seed=None, samples=None, out=None))]
fn suite(py: Python<'_>, seed: Option<u64>, samples: Option<u64>, out: Option<PathBuf>) -> PyResult<Vec<(u32, String, bool, Vec<String>)>> {
    let mut s = SuiteSettings::default();
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(n) = samples {
        s.samples = n;
    }
    let outcomes = py.detach(|| run_suite(&s, out.as_deref())).map_err(to_py)?;
    Ok(outcomes.into_iter().map(|o| (o.id, o.title, o.pass, o.lines)).collect())
}

#[pymodule]
fn pyinterlace(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(graph_summary, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(hinge, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_shift_tv, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(suite, m)?)?;
    Ok(())
}
