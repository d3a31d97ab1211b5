//! Python bindings: scenario loading, classical scattering data, transition
//! tables, closed forms and the split-operator comparison.

use anharmonic::config::RunConfig;
use anharmonic::error::Error;
use anharmonic::pipeline::{self, Numerics, Pipeline};
use anharmonic::profiles::Scenario;
use anharmonic::smatrix::{self, ExponentVariant};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::InvalidSpan(_) | Error::Domain(_) | Error::Capacity(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn variant(name: &str) -> PyResult<ExponentVariant> {
    match name.to_ascii_lowercase().as_str() {
        "a" => Ok(ExponentVariant::A),
        "b" => Ok(ExponentVariant::B),
        _ => Err(PyValueError::new_err(format!("variant must be 'a' or 'b' (got {name:?})"))),
    }
}

/// Asymptotic constants of the classical solution.
#[pyclass(name = "ScatteringParams", frozen)]
struct PyScatteringParams {
    #[pyo3(get)]
    omega_in: f64,
    #[pyo3(get)]
    omega_out: f64,
    #[pyo3(get)]
    rho: f64,
    #[pyo3(get)]
    delta1: f64,
    #[pyo3(get)]
    delta2: f64,
    #[pyo3(get)]
    nu: f64,
    #[pyo3(get)]
    theta: f64,
    #[pyo3(get)]
    kbar0: f64,
    #[pyo3(get)]
    fit_residual: f64,
}

#[pymethods]
impl PyScatteringParams {
    fn __repr__(&self) -> String {
        format!(
            "ScatteringParams(rho={}, nu={}, theta={}, kbar0={})",
            self.rho, self.nu, self.theta, self.kbar0
        )
    }
}

/// First-order transition probabilities `w[m][n]` with per-entry flags.
#[pyclass(name = "TransitionTable", frozen)]
struct PyTransitionTable {
    #[pyo3(get)]
    lambda_: f64,
    #[pyo3(get)]
    w: Vec<Vec<f64>>,
    #[pyo3(get)]
    flags: Vec<Vec<String>>,
    /// Zero-order amplitudes `(re, im)` for `m, n <= n_max`.
    #[pyo3(get)]
    s0: Vec<Vec<(f64, f64)>>,
    #[pyo3(get)]
    method: String,
}

#[pymethods]
impl PyTransitionTable {
    fn column_sum(&self, n: usize) -> PyResult<f64> {
        if n >= self.w.len() {
            return Err(PyValueError::new_err(format!("column {n} beyond n_max")));
        }
        Ok(self.w.iter().map(|r| r[n]).sum())
    }
}

/// Scenario plus numerics, built from the TOML run-config format.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    scenario: Scenario,
    numerics: Numerics,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let cfg = RunConfig::from_toml(text).map_err(to_py)?;
        Ok(Self {
            scenario: cfg.scenario,
            numerics: cfg.numerics,
        })
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.scenario.lambda
    }

    #[getter]
    fn tau_span(&self) -> (f64, f64) {
        (self.scenario.start(), self.scenario.end())
    }

    #[getter]
    fn n_max(&self) -> usize {
        self.numerics.n_max
    }

    fn scattering_params(&self, py: Python<'_>) -> PyResult<PyScatteringParams> {
        let (_, p) = py
            .detach(|| pipeline::solve_classical(&self.scenario, &self.numerics))
            .map_err(to_py)?;
        Ok(PyScatteringParams {
            omega_in: p.omega_in,
            omega_out: p.omega_out,
            rho: p.rho,
            delta1: p.delta1,
            delta2: p.delta2,
            nu: p.nu,
            theta: p.theta,
            kbar0: p.kbar0,
            fit_residual: p.fit_residual,
        })
    }

    /// Runs the full pipeline; `lambda_` defaults to the scenario's coupling.
    #[pyo3(signature = (lambda_=None, variant="a"))]
    fn transition_table(&self, py: Python<'_>, lambda_: Option<f64>, variant: &str) -> PyResult<PyTransitionTable> {
        let v = self::variant(variant)?;
        let lambda = lambda_.unwrap_or(self.scenario.lambda);
        let t = py
            .detach(|| Pipeline::run(&self.scenario, &self.numerics).and_then(|p| p.transition_table(lambda, v)))
            .map_err(to_py)?;
        let size = t.n_max + 1;
        Ok(PyTransitionTable {
            lambda_: t.lambda,
            w: t.w.clone(),
            flags: t.flags.iter().map(|r| r.iter().map(|f| f.label()).collect()).collect(),
            s0: t.s0[..size].iter().map(|r| r[..size].iter().map(|c| (c.re, c.im)).collect()).collect(),
            method: t.method.label().to_string(),
        })
    }

    /// Compares `W_{m,n_in}` against the split-operator solution for each
    /// coupling; returns one dict per coupling plus the consistent variants.
    #[pyo3(signature = (lambdas, m=0))]
    fn oracle_compare<'py>(&self, py: Python<'py>, lambdas: Vec<f64>, m: usize) -> PyResult<(Vec<Bound<'py, pyo3::types::PyDict>>, Vec<String>)> {
        let cmp = py
            .detach(|| Pipeline::run(&self.scenario, &self.numerics).and_then(|p| pipeline::oracle_compare(&p, m, &lambdas)))
            .map_err(to_py)?;
        let rows = cmp
            .rows
            .iter()
            .map(|r| {
                let d = pyo3::types::PyDict::new(py);
                d.set_item("lambda", r.lambda)?;
                d.set_item("w_pert_a", r.w_pert_a)?;
                d.set_item("w_pert_b", r.w_pert_b)?;
                d.set_item("w_exact", r.w_exact)?;
                d.set_item("err_a", r.err_a)?;
                d.set_item("err_b", r.err_b)?;
                d.set_item("ratio_a", r.ratio_a)?;
                d.set_item("ratio_b", r.ratio_b)?;
                Ok(d)
            })
            .collect::<PyResult<_>>()?;
        let consistent = cmp.consistent.iter().map(|v| format!("{v:?}").to_ascii_lowercase()).collect();
        Ok((rows, consistent))
    }
}

/// Zero-order amplitude from the generating function.
#[pyfunction]
fn s0_generating(m: usize, n: usize, rho: f64) -> PyResult<f64> {
    smatrix::s0_generating(m, n, rho).map_err(to_py)
}

/// Zero-order transition probability in Legendre form.
#[pyfunction]
fn w0_legendre(m: usize, n: usize, rho: f64) -> PyResult<f64> {
    smatrix::w0_legendre(m, n, rho).map_err(to_py)
}

/// Closed-form ground-state persistence probability.
#[pyfunction]
#[pyo3(signature = (lambda_tilde, rho, double_exponent=false))]
fn w00_closed_form(lambda_tilde: f64, rho: f64, double_exponent: bool) -> PyResult<f64> {
    smatrix::w00_closed_form(lambda_tilde, rho, double_exponent).map_err(to_py)
}

/// Reflection coefficient of a tanh frequency ramp.
#[pyfunction]
fn tanh_profile_rho(omega_in: f64, omega_out: f64, ramp_time: f64) -> f64 {
    anharmonic::classical::tanh_profile_rho(omega_in, omega_out, ramp_time)
}

#[pymodule]
fn anharmonic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyScatteringParams>()?;
    m.add_class::<PyTransitionTable>()?;
    m.add_function(wrap_pyfunction!(s0_generating, m)?)?;
    m.add_function(wrap_pyfunction!(w0_legendre, m)?)?;
    m.add_function(wrap_pyfunction!(w00_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(tanh_profile_rho, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
