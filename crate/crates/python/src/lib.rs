//! Python bindings for the boxdfm solver.
//!
//! Reports are returned as plain Python objects (dicts and lists) decoded
//! from their JSON form.

use std::path::PathBuf;

use boxdfm::runner::{self, RunError, SolutionField};
use boxdfm::{IntersectionPolicy, Preconditioner};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyFileNotFoundError, PyValueError};
use pyo3::prelude::*;

create_exception!(pyboxdfm, SolverError, PyException);

fn to_py(e: RunError) -> PyErr {
    let msg = e.to_string();
    match e.exit_code() {
        2 => PyValueError::new_err(msg),
        4 => PyFileNotFoundError::new_err(msg),
        _ => SolverError::new_err(msg),
    }
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn json_error(e: serde_json::Error) -> PyErr {
    SolverError::new_err(e.to_string())
}

fn point(v: &[f64], dim: usize) -> PyResult<[f64; 3]> {
    if v.len() != dim {
        return Err(PyValueError::new_err(format!("expected {dim} coordinates, got {}", v.len())));
    }
    let mut p = [0.0; 3];
    p[..dim].copy_from_slice(v);
    Ok(p)
}

/// A simulation scenario: mesh, materials, boundary conditions and outputs.
#[pyclass(name = "Scenario", module = "pyboxdfm")]
struct PyScenario {
    inner: runner::Scenario,
}

#[pymethods]
impl PyScenario {
    /// Looks up a built-in scenario by name.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        runner::builtin(name).map(|inner| Self { inner }).map_err(to_py)
    }

    /// Parses a scenario from JSON; relative mesh paths resolve against `base_dir`.
    #[staticmethod]
    #[pyo3(signature = (text, base_dir=None))]
    fn from_json(text: &str, base_dir: Option<PathBuf>) -> PyResult<Self> {
        runner::Scenario::from_json(text, base_dir.as_deref()).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        runner::Scenario::from_file(path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn refine(&self) -> usize {
        self.inner.refine
    }

    #[setter]
    fn set_refine(&mut self, levels: usize) {
        self.inner.refine = levels;
    }

    #[getter]
    fn policy(&self) -> PyResult<String> {
        let value = serde_json::to_value(self.inner.policy).map_err(json_error)?;
        Ok(value.as_str().unwrap_or_default().to_string())
    }

    /// `"fracture-penetrates"` or `"barrier-cuts"`.
    #[setter]
    fn set_policy(&mut self, policy: &str) -> PyResult<()> {
        self.inner.policy = policy.parse::<IntersectionPolicy>().map_err(PyValueError::new_err)?;
        Ok(())
    }

    /// Solver settings: relative tolerance and preconditioner (`"none"`, `"jacobi"` or `"ic0"`).
    #[pyo3(signature = (tol=None, preconditioner=None))]
    fn set_solver(&mut self, tol: Option<f64>, preconditioner: Option<&str>) -> PyResult<()> {
        if let Some(t) = tol {
            self.inner.solver.tol = t;
        }
        if let Some(p) = preconditioner {
            self.inner.solver.preconditioner = p.parse::<Preconditioner>().map_err(PyValueError::new_err)?;
        }
        Ok(())
    }

    /// Raises if the mesh file is missing.
    fn check_available(&self) -> PyResult<()> {
        self.inner.check_available().map_err(to_py)
    }

    /// Solves the scenario and writes the output files to `out_dir` when given.
    #[pyo3(signature = (out_dir=None))]
    fn run(&self, py: Python<'_>, out_dir: Option<PathBuf>) -> PyResult<PySolution> {
        let scenario = self.inner.clone();
        let outcome = py.detach(|| runner::run_scenario(&scenario, out_dir.as_deref())).map_err(to_py)?;
        let report = serde_json::to_string(&outcome.report).map_err(json_error)?;
        let profiles = outcome.profiles.into_iter().map(|(n, p)| (n, p.s, p.values)).collect();
        Ok(PySolution { field: outcome.field, report, profiles })
    }

    /// Runs a uniform-refinement study and returns its table as a dict.
    #[pyo3(signature = (levels=4, min_order=1.9, max_order=2.1))]
    fn convergence<'py>(&self, py: Python<'py>, levels: usize, min_order: f64, max_order: f64) -> PyResult<Bound<'py, PyAny>> {
        let scenario = self.inner.clone();
        let report = py
            .detach(|| runner::run_convergence_study(&scenario, levels, (min_order, max_order)))
            .map_err(to_py)?;
        loads(py, &serde_json::to_string(&report).map_err(json_error)?)
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?})", self.inner.name)
    }
}

/// A discrete pressure field with one value per degree of freedom.
#[pyclass(name = "Solution", module = "pyboxdfm")]
struct PySolution {
    field: SolutionField,
    report: String,
    profiles: Vec<(String, Vec<f64>, Vec<f64>)>,
}

#[pymethods]
impl PySolution {
    /// Loads a field from a `solution.json` written by a previous run.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyFileNotFoundError::new_err(e.to_string()))?;
        let field = SolutionField::load(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { field, report: "null".into(), profiles: Vec::new() })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.field.mesh().dim()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.field.values().to_vec()
    }

    #[getter]
    fn num_dofs(&self) -> usize {
        self.field.values().len()
    }

    /// The run report (dof summary, solver statistics, conservation, warnings), or None after `load`.
    #[getter]
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        loads(py, &self.report)
    }

    /// Slices requested by the scenario: name -> (s, pressure).
    #[getter]
    fn profiles(&self) -> Vec<(String, (Vec<f64>, Vec<f64>))> {
        self.profiles.iter().map(|(n, s, v)| (n.clone(), (s.clone(), v.clone()))).collect()
    }

    /// Pressure at a point.
    fn eval(&self, point: Vec<f64>) -> PyResult<f64> {
        let p = self::point(&point, self.dim())?;
        self.field.eval(&p).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Samples `n` equally spaced points from `start` to `end`; returns (s, pressure).
    #[pyo3(signature = (start, end, n=201))]
    fn slice(&self, start: Vec<f64>, end: Vec<f64>, n: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let dim = self.dim();
        let profile = self
            .field
            .sample_slice(&point(&start, dim)?, &point(&end, dim)?, n)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok((profile.s, profile.values))
    }

    fn __repr__(&self) -> String {
        format!("Solution(dim={}, dofs={})", self.dim(), self.num_dofs())
    }
}

#[pyfunction]
fn builtin_names() -> Vec<String> {
    runner::builtin_names()
}

#[pymodule]
fn pyboxdfm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(builtin_names, m)?)?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    Ok(())
}
