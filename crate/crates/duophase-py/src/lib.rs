//! Python bindings for the duophase solver.
//!
//! The module mirrors the CLI workflow: build a problem from config text,
//! validate it, evaluate energies and Rayleigh quotients on nodal vectors,
//! compute the two thresholds, solve at a given lambda, and optimize the
//! first threshold over a named weight family.

use duophase::config::{parse_weight_family, RunConfig};
use duophase::{
    certify_nonexistence, minimize_r1, minimize_r2, modular, r1, r2, solve_at, solve_at_warm,
    GridFunction, ProblemSpec, QuotientConfig, SolveStatus,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py_err(e: duophase::Error) -> PyErr {
    match e {
        duophase::Error::Config(_) | duophase::Error::Expr(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A discretized double-phase eigenvalue problem.
#[pyclass]
struct Problem {
    config: RunConfig,
    spec: ProblemSpec,
    solver: QuotientConfig,
}

/// Eigen solve outcome exposed to Python.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct EigenSolution {
    #[pyo3(get)]
    lambda_value: f64,
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    residual_norm: f64,
    #[pyo3(get)]
    r1_value: f64,
    #[pyo3(get)]
    r2_value: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    values: Vec<f64>,
}

#[pymethods]
impl EigenSolution {
    fn __repr__(&self) -> String {
        format!(
            "EigenSolution(lambda={:.6e}, status={}, residual={:.3e})",
            self.lambda_value, self.status, self.residual_norm
        )
    }
}

impl Problem {
    fn grid_function(&self, values: Vec<f64>) -> PyResult<GridFunction> {
        GridFunction::from_values(self.spec.mesh(), values).map_err(to_py_err)
    }
}

#[pymethods]
impl Problem {
    /// Build a problem from config text (same grammar as the CLI files).
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        let config = RunConfig::parse(text).map_err(to_py_err)?;
        let (spec, solver) = config.build().map_err(to_py_err)?;
        Ok(Problem {
            config,
            spec,
            solver,
        })
    }

    #[staticmethod]
    fn from_config_file(path: &str) -> PyResult<Self> {
        let config = RunConfig::parse_file(std::path::Path::new(path)).map_err(to_py_err)?;
        let (spec, solver) = config.build().map_err(to_py_err)?;
        Ok(Problem {
            config,
            spec,
            solver,
        })
    }

    /// Number of interior unknowns.
    #[getter]
    fn n_interior(&self) -> usize {
        self.spec.mesh().n_interior()
    }

    /// Resolved config echo (the manifest text).
    fn manifest(&self) -> String {
        self.config.manifest()
    }

    /// Structural validation; returns (passed, report text).
    fn validate(&self) -> (bool, String) {
        let report = self.spec.validate();
        (report.passed(), report.to_string())
    }

    /// Interpolate an expression over (x, y) onto the mesh, returning the
    /// interior nodal values.
    fn interpolate(&self, expr: &str) -> PyResult<Vec<f64>> {
        let parsed = duophase::expr::Expression::parse(expr).map_err(to_py_err)?;
        let u = self
            .spec
            .mesh()
            .interpolate(|p| parsed.eval(p[0], p[1], 0.0))
            .map_err(to_py_err)?;
        Ok(u.values().to_vec())
    }

    /// (phi, psi, theta, e2) energies of a nodal vector.
    fn energies(&self, values: Vec<f64>) -> PyResult<(f64, f64, f64, f64)> {
        let u = self.grid_function(values)?;
        let e = self.spec.energies(&u).map_err(to_py_err)?;
        Ok((e.phi_value, e.psi_value, e.theta_value, e.e2_value))
    }

    fn total_energy(&self, values: Vec<f64>, lambda: f64) -> PyResult<f64> {
        let u = self.grid_function(values)?;
        self.spec.total_energy(&u, lambda).map_err(to_py_err)
    }

    /// First Rayleigh quotient of a nodal vector.
    fn r1(&self, values: Vec<f64>) -> PyResult<f64> {
        let u = self.grid_function(values)?;
        r1(&u, &self.spec).map_err(to_py_err)
    }

    /// Second Rayleigh quotient of a nodal vector.
    fn r2(&self, values: Vec<f64>) -> PyResult<f64> {
        let u = self.grid_function(values)?;
        r2(&u, &self.spec).map_err(to_py_err)
    }

    /// Modular of a nodal vector in the psi exponent space.
    fn modular_p2(&self, values: Vec<f64>) -> PyResult<f64> {
        let u = self.grid_function(values)?;
        Ok(modular(&u, self.spec.psi().exponent()))
    }

    /// Luxemburg norm of a nodal vector in the psi exponent space.
    fn luxemburg_norm_p2(&self, values: Vec<f64>) -> PyResult<f64> {
        let u = self.grid_function(values)?;
        duophase::luxemburg_norm(&u, self.spec.psi().exponent()).map_err(to_py_err)
    }

    /// Scaled weak-residual sup norm at lambda.
    fn residual_norm(&self, values: Vec<f64>, lambda: f64) -> PyResult<f64> {
        let u = self.grid_function(values)?;
        let (norm, _) = self.spec.weak_residual(&u, lambda).map_err(to_py_err)?;
        Ok(norm)
    }

    /// (lambda_star, lambda_lower) with their minimizing nodal vectors.
    fn thresholds(&self) -> PyResult<((f64, Vec<f64>), (f64, Vec<f64>))> {
        let first = minimize_r1(&self.spec, &self.solver).map_err(to_py_err)?;
        let second = minimize_r2(&self.spec, &self.solver).map_err(to_py_err)?;
        Ok((
            (first.value, first.minimizer.values().to_vec()),
            (second.value, second.minimizer.values().to_vec()),
        ))
    }

    /// Solve at lambda; optional warm start nodal vector.
    #[pyo3(signature = (lambda, warm=None))]
    fn solve_at(&self, lambda: f64, warm: Option<Vec<f64>>) -> PyResult<EigenSolution> {
        let result = match warm {
            Some(values) => {
                let w = self.grid_function(values)?;
                solve_at_warm(lambda, &self.spec, &self.solver, &w).map_err(to_py_err)?
            }
            None => solve_at(lambda, &self.spec, &self.solver).map_err(to_py_err)?,
        };
        let status = match result.status {
            SolveStatus::Converged => "converged",
            SolveStatus::TrivialOnly => "trivial_only",
            SolveStatus::MaxIter => "max_iter",
        };
        Ok(EigenSolution {
            lambda_value: result.lambda,
            status: status.to_string(),
            residual_norm: result.residual_norm,
            r1_value: result.r1_value,
            r2_value: result.r2_value,
            iterations: result.iterations,
            values: result.u.values().to_vec(),
        })
    }

    /// Certify nonexistence at lambda below the second threshold; returns the
    /// certificate text.
    fn certify_nonexistence(&self, lambda: f64, lambda_lower: f64) -> PyResult<String> {
        let cert = certify_nonexistence(lambda, lambda_lower, &self.spec, &self.solver)
            .map_err(to_py_err)?;
        Ok(format!("{cert}"))
    }

    /// Minimize lambda_star over a weight family given as config text
    /// (`name = const v` / `name = expr "..."` lines). Returns
    /// (winner, value, table) with table rows (name, lambda_star).
    fn optimize_weights(&self, weights_text: &str) -> PyResult<(String, f64, Vec<(String, f64)>)> {
        let family = parse_weight_family(weights_text, self.spec.mesh()).map_err(to_py_err)?;
        let outcome = duophase::optimize(&family, &self.spec, &self.solver).map_err(to_py_err)?;
        Ok((
            outcome.winner,
            outcome.value,
            outcome
                .table
                .into_iter()
                .map(|row| (row.name, row.lambda_star))
                .collect(),
        ))
    }
}

/// Conjugate exponent p / (p - 1).
#[pyfunction]
fn conjugate(p: f64) -> PyResult<f64> {
    duophase::conjugate(p).map_err(to_py_err)
}

/// Critical Sobolev exponent, or None when p >= N.
#[pyfunction]
fn critical_exponent(p: f64, dimension: usize) -> Option<f64> {
    duophase::critical_exponent(p, dimension).finite()
}

#[pymodule]
fn duophase_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<EigenSolution>()?;
    m.add_function(wrap_pyfunction!(conjugate, m)?)?;
    m.add_function(wrap_pyfunction!(critical_exponent, m)?)?;
    Ok(())
}
