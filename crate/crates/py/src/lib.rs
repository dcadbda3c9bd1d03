//! Python bindings: parameters, single runs, transport paths and the verification suites.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use rosenblatt_core as core;
use core::{Coupling, RawParams, RunOptions};

create_exception!(rosenblatt, ConfigError, PyValueError, "Invalid parameters or configuration.");
create_exception!(rosenblatt, NumericalError, PyRuntimeError, "A computation failed to converge or exceeded its budget.");

fn to_py(err: core::Error) -> PyErr {
    let msg = format!("{}: {}", err.code(), err);
    if err.is_config() {
        ConfigError::new_err(msg)
    } else {
        NumericalError::new_err(msg)
    }
}

fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Validated run parameters.
#[pyclass(name = "Params", module = "rosenblatt", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: core::Params,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (H=0.75, beta=0.44, gamma=0.03, a=-1.0, T=1.0, n=64, output_grid_size=17, time_quad_points=8, bm_mesh=4096, seed=7))]
    #[allow(non_snake_case, clippy::too_many_arguments)]
    fn new(
        H: f64,
        beta: f64,
        gamma: f64,
        a: f64,
        T: f64,
        n: u64,
        output_grid_size: usize,
        time_quad_points: usize,
        bm_mesh: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let raw = RawParams { hurst: H, beta, gamma, a, horizon: T, n, output_grid_size, time_quad_points, bm_mesh, seed };
        Ok(PyParams { inner: raw.validate().map_err(to_py)? })
    }

    #[getter(H)]
    fn hurst(&self) -> f64 {
        self.inner.hurst()
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }
    #[getter]
    fn a(&self) -> f64 {
        self.inner.a()
    }
    #[getter(T)]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }
    #[getter]
    fn n(&self) -> u64 {
        self.inner.n()
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }
    /// Truncation level ε_n.
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }
    #[getter]
    fn output_grid(&self) -> Vec<f64> {
        self.inner.output_grid()
    }

    fn with_n(&self, n: u64) -> PyResult<Self> {
        Ok(PyParams { inner: self.inner.with_n(n).map_err(to_py)? })
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_object(py, &self.inner.raw())
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("Params(H={}, beta={}, gamma={}, a={}, T={}, n={})", p.hurst(), p.beta(), p.gamma(), p.a(), p.horizon(), p.n())
    }
}

/// `c(H)` and the relative error of its quadrature.
#[pyfunction]
#[pyo3(signature = (params, quad_budget=4000))]
fn normalizing_constant(params: &PyParams, quad_budget: usize) -> PyResult<(f64, f64)> {
    let k = core::normalizing_constant(&params.inner, quad_budget).map_err(to_py)?;
    Ok((k.c_h, k.c_h_rel_err))
}

/// One run on the output grid; returns a dict of lists plus `meta` and `error_budget`.
#[pyfunction]
#[pyo3(signature = (params, seed=None, with_reference=false, coupling="coupled"))]
fn simulate(py: Python<'_>, params: &PyParams, seed: Option<u64>, with_reference: bool, coupling: &str) -> PyResult<Py<PyAny>> {
    let coupling = match coupling {
        "coupled" => Coupling::Coupled,
        "independent" => Coupling::Independent,
        other => return Err(ConfigError::new_err(format!("unknown coupling {other:?}"))),
    };
    let p = &params.inner;
    let seed = seed.unwrap_or(p.seed());
    let opts = RunOptions { coupling, with_reference, ..RunOptions::default() };
    let run = py.detach(|| core::assemble_run(&p.output_grid(), p, seed, &opts)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("t", &run.t_grid)?;
    out.set_item("X1", &run.x1)?;
    out.set_item("X2", &run.x2)?;
    out.set_item("X3", &run.x3)?;
    out.set_item("X", &run.x)?;
    out.set_item("Xref", &run.xref)?;
    out.set_item("meta", to_object(py, &run.meta)?)?;
    out.set_item("error_budget", to_object(py, &run.error_budget)?)?;
    Ok(out.into_any().unbind())
}

/// Knot times and values of a transport path with intensity `n` on `[t0, t1]`.
#[pyfunction]
fn simulate_transport(n: u64, t0: f64, t1: f64, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let z = core::simulate_transport(n, (t0, t1), seed).map_err(to_py)?;
    Ok((z.path().times().to_vec(), z.path().values().to_vec()))
}

/// Runs a verification suite and returns its report as a dict.
#[pyfunction]
#[pyo3(signature = (suite, params, reps=None, seed=None, ns=None))]
fn verify(py: Python<'_>, suite: &str, params: &PyParams, reps: Option<usize>, seed: Option<u64>, ns: Option<Vec<u64>>) -> PyResult<Py<PyAny>> {
    let p = params.inner.clone();
    let seed = seed.unwrap_or(p.seed());
    match suite {
        "coupling" => {
            let ns = ns.unwrap_or_else(|| vec![8, 16, 32, 64, 128]);
            let r = py.detach(|| core::run_coupling_rate(&p, &ns, reps.unwrap_or(200), seed)).map_err(to_py)?;
            to_object(py, &r)
        }
        "rate" => {
            let ns = ns.unwrap_or_else(|| vec![16, 32, 64, 128]);
            let r = py.detach(|| core::run_strong_rate(&p, &ns, reps.unwrap_or(200), seed)).map_err(to_py)?;
            to_object(py, &r)
        }
        "law" => {
            let r = py.detach(|| core::run_law_suite(&p, reps.unwrap_or(500), seed)).map_err(to_py)?;
            to_object(py, &r)
        }
        "oracle" => {
            let r = py.detach(|| core::run_oracle_suite(&p, reps.unwrap_or(1000), seed)).map_err(to_py)?;
            to_object(py, &r)
        }
        "constants" => {
            let r = py.detach(|| core::run_constants(&p)).map_err(to_py)?;
            to_object(py, &r)
        }
        other => Err(ConfigError::new_err(format!("unknown suite {other:?}"))),
    }
}

/// SHA-256 of the canonical JSON form of a dict.
#[pyfunction]
fn config_hash(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<String> {
    let text: String = py.import("json")?.call_method1("dumps", (config,))?.extract()?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| ConfigError::new_err(e.to_string()))?;
    Ok(core::config_hash(&value))
}

#[pymodule]
fn rosenblatt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(normalizing_constant, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_transport, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    Ok(())
}
