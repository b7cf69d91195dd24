//! Python bindings for a small part of `hardy-core`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hardy_core::exterior;
use hardy_core::mesh::{build_interval_mesh, default_grade_ratio};
use hardy_core::oracles::{self, Profile1D};
use hardy_core::{
    minimize_quotient, BoundaryPartition, Condition, Domain, HardyError, Mesh, QuotientProblem, SolverConfig,
};

fn err(e: HardyError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyfunction]
fn cp_constant(p: f64) -> PyResult<f64> {
    hardy_core::cp_constant(p).map_err(err)
}

#[pyfunction]
fn theorem2_bound(p: f64, r_in: f64, sigma_max: f64) -> PyResult<f64> {
    oracles::theorem2_bound(p, r_in, sigma_max).map_err(err)
}

/// `(lhs, rhs)` of the one-dimensional inequality for a piecewise linear profile.
#[pyfunction]
fn lemma1_sides(breakpoints: Vec<f64>, values: Vec<f64>, sigma: f64, p: f64) -> PyResult<(f64, f64)> {
    let profile = Profile1D::new(breakpoints, values).map_err(err)?;
    oracles::lemma1_sides(&profile, sigma, p).map_err(err)
}

#[pyfunction]
fn robin_exterior_constant(n: usize, p: f64, sigma: f64, radius: f64) -> PyResult<f64> {
    exterior::robin_exterior_constant(n, p, sigma, radius).map_err(err)
}

#[pyfunction]
fn uk_quotient(k_log: f64, radius: f64, sigma: f64, n: usize) -> PyResult<f64> {
    exterior::uk_quotient(k_log, radius, sigma, n).map_err(err)
}

/// Discrete constant on `[0, 1]`. An end with `sigma = None` is Dirichlet.
#[pyfunction]
#[pyo3(signature = (p, cells, sigma_left=None, sigma_right=None, max_iter=2000))]
fn estimate_interval<'py>(
    py: Python<'py>,
    p: f64,
    cells: usize,
    sigma_left: Option<f64>,
    sigma_right: Option<f64>,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cond = |s: Option<f64>| s.map_or(Condition::Dirichlet, |sigma| Condition::Robin { sigma });
    let domain = Domain::interval(0.0, 1.0).map_err(err)?;
    let partition = BoundaryPartition::new(&domain, vec![cond(sigma_left), cond(sigma_right)]).map_err(err)?;
    let toward = partition.dirichlet_pieces();
    let ratio = default_grade_ratio(cells / toward.len().max(1));
    let mesh = Mesh::Interval(build_interval_mesh(&domain, cells, ratio, &toward).map_err(err)?);
    let problem = QuotientProblem::new(domain, partition, p, mesh).map_err(err)?;
    let config = SolverConfig {
        max_iter,
        ..Default::default()
    };
    let report = minimize_quotient(&problem, &config).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("lambda_estimate", report.lambda_estimate)?;
    d.set_item("analytic_lower", report.analytic_lower)?;
    d.set_item("analytic_upper", report.analytic_upper)?;
    d.set_item("iterations", report.iterations)?;
    d.set_item("converged", report.converged)?;
    d.set_item("violation", report.violation)?;
    d.set_item("notes", report.notes)?;
    Ok(d)
}

#[pymodule]
fn hardy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(cp_constant, m)?)?;
    m.add_function(wrap_pyfunction!(theorem2_bound, m)?)?;
    m.add_function(wrap_pyfunction!(lemma1_sides, m)?)?;
    m.add_function(wrap_pyfunction!(robin_exterior_constant, m)?)?;
    m.add_function(wrap_pyfunction!(uk_quotient, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_interval, m)?)?;
    Ok(())
}
