//! Python bindings for the mixed fractional normalized-solution solver.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyString};

use mixfrac_core::cli::ResultFile;
use mixfrac_core::fiber::{fiber_scan, log_grid};
use mixfrac_core::gn::petviashvili_solve;
use mixfrac_core::io::{self, parse_config, save_field, solve_config, write_atomic, FieldMeta, RunConfig};
use mixfrac_core::solver::{initial_guess, mass_scan_rescaled, verify_solution, SolveResult};
use mixfrac_core::{make_grid, Error, Field, ProblemSpec};

create_exception!(mixfrac_ns, SolverError, PyRuntimeError, "The solver failed numerically.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::InvalidParameter { .. }
        | Error::InvalidGrid(_)
        | Error::Admissibility(_)
        | Error::FieldFile(_)
        | Error::GridMismatch
        | Error::NoAnalyticPotential(_) => PyValueError::new_err(e.to_string()),
        _ => SolverError::new_err(e.to_string()),
    }
}

/// A configured problem: parameters, grid and solver controls.
///
/// Built from the same flat configuration the command line reads, given as a
/// dict or a JSON string.
#[pyclass(module = "mixfrac_ns", frozen)]
struct Problem {
    config: RunConfig,
    spec: ProblemSpec,
    warnings: Vec<String>,
}

#[pymethods]
impl Problem {
    #[new]
    #[pyo3(signature = (config, strict_keys = false, strict_assumptions = false))]
    fn new(config: &Bound<'_, PyAny>, strict_keys: bool, strict_assumptions: bool) -> PyResult<Self> {
        let text = if let Ok(s) = config.cast::<PyString>() {
            s.to_string()
        } else {
            let json = config.py().import("json")?;
            json.call_method1("dumps", (config,))?.extract::<String>()?
        };
        let (loaded, spec) = parse_config(&text, strict_keys, strict_assumptions).map_err(to_py)?;
        Ok(Problem {
            config: loaded.config,
            spec,
            warnings: loaded.warnings,
        })
    }

    /// The configuration as a JSON string.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.config).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Non-fatal remarks from parsing (unknown keys, admissibility).
    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.warnings.clone()
    }

    #[getter]
    fn admissible(&self) -> bool {
        self.spec.assumptions().admissible()
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        let g = self.spec.grid();
        vec![g.n_per_dim(); g.dim()]
    }

    /// Grid coordinates along one axis.
    fn axis(&self) -> Vec<f64> {
        self.spec.grid().axis_points()
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(d={}, s1={}, s2={}, a={}, N={}, L={})",
            self.config.d, self.config.s1, self.config.s2, self.config.a, self.config.n, self.config.l
        )
    }
}

type CheckRow = (String, bool, bool, String);

/// A computed normalized solution with its diagnostics.
#[pyclass(module = "mixfrac_ns", frozen)]
struct Solution {
    result: SolveResult,
    config: RunConfig,
    spec: ProblemSpec,
}

#[pymethods]
impl Solution {
    /// The Lagrange multiplier λ.
    #[getter]
    fn multiplier(&self) -> f64 {
        self.result.lambda
    }

    #[getter]
    fn level(&self) -> f64 {
        self.result.level()
    }

    #[getter]
    fn pohozaev_residual(&self) -> f64 {
        self.result.pohozaev_residual
    }

    #[getter]
    fn el_residual(&self) -> f64 {
        self.result.el_residual
    }

    #[getter]
    fn mass_error(&self) -> f64 {
        self.result.mass_error
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.result.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.result.converged
    }

    #[getter]
    fn energy_monotone(&self) -> bool {
        self.result.energy_monotone
    }

    /// Energy parts: kin1, kin2, pot, nl, i, j.
    fn energies<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let e = &self.result.energies;
        let d = PyDict::new(py);
        for (k, v) in [("kin1", e.kin1), ("kin2", e.kin2), ("pot", e.pot), ("nl", e.nl), ("i", e.i), ("j", e.j)] {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    /// Field samples in row-major order; reshape with `shape`.
    fn values(&self) -> Vec<f64> {
        self.result.u.values().to_vec()
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        let g = self.result.u.grid();
        vec![g.n_per_dim(); g.dim()]
    }

    /// Runs the verification checks: `(passed, [(name, passed, applicable, detail)])`.
    fn verify(&self) -> PyResult<(bool, Vec<CheckRow>)> {
        let report = verify_solution(&self.result, &self.spec).map_err(to_py)?;
        let checks = report
            .checks
            .iter()
            .map(|c| (c.name.clone(), c.passed, c.applicable, c.detail.clone()))
            .collect();
        Ok((report.passed(), checks))
    }

    /// Writes `solution.json` and the field files into `directory`, in the
    /// layout `mixfrac-ns verify` reads.
    fn save(&self, directory: PathBuf) -> PyResult<()> {
        let name = "solution.field.json";
        save_field(&self.result.u, FieldMeta::of(&self.spec), &directory.join(name)).map_err(to_py)?;
        let file = ResultFile {
            config: self.config.clone(),
            field: name.into(),
            result: self.result.record(),
        };
        let json = serde_json::to_string_pretty(&file).map_err(|e| PyValueError::new_err(e.to_string()))?;
        write_atomic(&directory.join("solution.json"), json.as_bytes()).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(multiplier={:.10e}, level={:.10e}, converged={})",
            self.result.lambda,
            self.result.level(),
            self.result.converged
        )
    }
}

/// Solves the problem with the method its configuration selects.
#[pyfunction]
fn solve(py: Python<'_>, problem: &Problem) -> PyResult<Solution> {
    let (config, spec) = (problem.config.clone(), problem.spec.clone());
    let result = py.detach(|| solve_config(&config, &spec)).map_err(to_py)?;
    Ok(Solution { result, config, spec })
}

/// Fractional Gagliardo–Nirenberg ground state: returns the record as a dict.
#[pyfunction]
#[pyo3(signature = (d, s, p, n, l, tol = 1e-10, max_iter = 5000))]
#[allow(clippy::too_many_arguments)]
fn gn_ground_state<'py>(
    py: Python<'py>,
    d: usize,
    s: f64,
    p: f64,
    n: usize,
    l: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let r = py
        .detach(|| -> mixfrac_core::Result<_> {
            let grid = make_grid(d, n, l)?;
            petviashvili_solve(d, s, p, &grid, tol, max_iter)
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("q_l2", r.q_l2)?;
    out.set_item("b_constant", r.b_constant)?;
    out.set_item("saturation_ratio", r.saturation_ratio)?;
    out.set_item("iterations", r.iterations)?;
    out.set_item("residual", r.residual)?;
    out.set_item("q", r.q_field.values().to_vec())?;
    Ok(out)
}

/// Samples Ψ and Ψ' on a log grid for `values` (default: the initial guess).
#[pyfunction]
#[pyo3(signature = (problem, values = None, t_min = 1e-2, t_max = 1e2, points = 201))]
fn fiber_map<'py>(
    py: Python<'py>,
    problem: &Problem,
    values: Option<Vec<f64>>,
    t_min: f64,
    t_max: f64,
    points: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = &problem.spec;
    let u = match values {
        Some(v) => Field::new(spec.grid().clone(), v),
        None => initial_guess(spec),
    }
    .map_err(to_py)?;
    let t = log_grid(t_min, t_max, points).map_err(to_py)?;
    let diag = fiber_scan(&u, spec, !spec.potential().is_none(), &t).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("t", diag.t_samples)?;
    out.set_item("psi", diag.psi)?;
    out.set_item("psi_prime", diag.psi_prime)?;
    out.set_item("t_star", diag.t_star)?;
    out.set_item("sign_changes", diag.sign_changes)?;
    Ok(out)
}

/// Levels and multipliers over increasing masses, each on a box rescaled to
/// the profile width.
#[pyfunction]
#[pyo3(signature = (problem, masses, jobs = 1))]
fn mass_scan<'py>(py: Python<'py>, problem: &Problem, masses: Vec<f64>, jobs: usize) -> PyResult<Bound<'py, PyDict>> {
    let spec = problem.spec.clone();
    let scan = py.detach(|| mass_scan_rescaled(&spec, &masses, jobs)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("a", scan.a_values)?;
    out.set_item("level", scan.level_values)?;
    out.set_item("multiplier", scan.lambda_values)?;
    out.set_item("converged", scan.converged)?;
    Ok(out)
}

/// Reads a field manifest: `(values, dims, box_length)`.
#[pyfunction]
fn load_field(path: PathBuf) -> PyResult<(Vec<f64>, Vec<usize>, f64)> {
    let (u, manifest) = io::load_field(&path).map_err(to_py)?;
    Ok((u.into_values(), manifest.dims, manifest.box_length))
}

#[pymodule]
fn mixfrac_ns(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add_class::<Problem>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(gn_ground_state, m)?)?;
    m.add_function(wrap_pyfunction!(fiber_map, m)?)?;
    m.add_function(wrap_pyfunction!(mass_scan, m)?)?;
    m.add_function(wrap_pyfunction!(load_field, m)?)?;
    Ok(())
}
