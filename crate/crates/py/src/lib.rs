//! Python module `rgg_coupling`. Graphs cross the boundary as `(n, edges)`
//! with `edges` a list of `(i, j)` pairs, `i < j`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use rgg_core::coupling::{run_coupling as run, CouplingConfig, MarginRule};
use rgg_core::experiments::run_fkg;
use rgg_core::graph::{sample_er as er, sample_rgg as rgg, Graph};
use rgg_core::graphstats;
use rgg_core::rng::stream;
use rgg_core::robust;
use rgg_core::SphericalLaw;

type Edges = Vec<(usize, usize)>;

fn py_err(e: rgg_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn edges(g: &Graph) -> Edges {
    g.edges().collect()
}

fn graph(n: usize, e: &[(usize, usize)]) -> PyResult<Graph> {
    Graph::from_edges(n, e).map_err(py_err)
}

#[pyfunction]
fn tau_threshold(d: usize, p: f64) -> PyResult<f64> {
    rgg_core::tau_threshold(d, p).map_err(py_err)
}

/// Measure-preserving involution of the coordinate law, swapping the parts
/// below and above `tau`.
#[pyfunction]
fn phi(d: usize, p: f64, x: f64) -> PyResult<f64> {
    SphericalLaw::new(d, p).and_then(|l| l.phi(x)).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (n, p, seed=0))]
fn sample_er(n: usize, p: f64, seed: u64) -> PyResult<Edges> {
    er(&mut stream(seed, "py.er", 0), n, p).map(|g| edges(&g)).map_err(py_err)
}

/// Returns `(edges, vectors)` with one length-`d` list per vertex.
#[pyfunction]
#[pyo3(signature = (n, d, p, seed=0))]
fn sample_rgg(n: usize, d: usize, p: f64, seed: u64) -> PyResult<(Edges, Vec<Vec<f64>>)> {
    let (g, emb) = rgg(&mut stream(seed, "py.rgg", 0), n, d, p).map_err(py_err)?;
    let vecs = (0..n).map(|i| emb.column(i).to_vec()).collect();
    Ok((edges(&g), vecs))
}

/// One sequential coupling run. Returns a dict with the input and realized
/// edges, the margin, and the fragile and disagreeing pairs.
#[pyfunction]
#[pyo3(signature = (n, d, p, seed=0, trial=0, margin=None))]
fn couple(
    py: Python<'_>,
    n: usize,
    d: usize,
    p: f64,
    seed: u64,
    trial: u64,
    margin: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let mut cfg = CouplingConfig::new(n, d, p).with_seed(seed);
    if let Some(m) = margin {
        cfg = cfg.with_margin(MarginRule::Explicit(m));
    }
    let out = run(&cfg, trial).map_err(py_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("input", edges(&out.input))?;
    dict.set_item("realized", edges(&out.realized))?;
    dict.set_item("tau", out.tau)?;
    dict.set_item("margin", out.margin)?;
    dict.set_item("fragile", out.fragile.clone())?;
    dict.set_item("disagreements", out.disagreements.clone())?;
    dict.set_item("contained", out.disagreements_within_fragile())?;
    Ok(dict.into_any().unbind())
}

#[pyfunction]
fn signed_triangles(n: usize, edges: Edges, p: f64) -> PyResult<f64> {
    Ok(graphstats::signed_triangles(&graph(n, &edges)?, p))
}

/// Largest absolute eigenvalue of the centered adjacency matrix.
#[pyfunction]
fn lambda_max_abs(n: usize, edges: Edges, p: f64) -> PyResult<f64> {
    graphstats::graph_lambda_max_abs(&graph(n, &edges)?, p).map_err(py_err)
}

/// `"RGG"` or `"NULL"` from the spectral decider.
#[pyfunction]
fn spectral_test(n: usize, edges: Edges, p: f64, d: usize) -> PyResult<&'static str> {
    robust::decide_spectral(&graph(n, &edges)?, p, d).map(|r| r.label()).map_err(py_err)
}

/// Four-vertex FKG counts: returns `(mu, a, pair_identity)` with `mu` the
/// four pattern probabilities, each value paired with its standard error.
#[pyfunction]
#[pyo3(signature = (d=3, samples=100_000, seed=0))]
#[allow(clippy::type_complexity)]
fn fkg(d: usize, samples: usize, seed: u64) -> PyResult<(Vec<(f64, f64)>, (f64, f64), (f64, f64))> {
    let e = run_fkg(seed, d, samples).map_err(py_err)?;
    let mu = e.mu.iter().map(|m| (m.value, m.se)).collect();
    Ok((mu, (e.a.value, e.a.se), (e.pair_identity.value, e.pair_identity.se)))
}

#[pymodule]
fn rgg_coupling(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tau_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(sample_er, m)?)?;
    m.add_function(wrap_pyfunction!(sample_rgg, m)?)?;
    m.add_function(wrap_pyfunction!(couple, m)?)?;
    m.add_function(wrap_pyfunction!(signed_triangles, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_max_abs, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_test, m)?)?;
    m.add_function(wrap_pyfunction!(fkg, m)?)?;
    Ok(())
}
