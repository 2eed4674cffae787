//! Python module `blockalt`.
//!
//! ```python
//! import blockalt
//! p = blockalt.Problem([(0, 3), (2, 10), (-1, 1)],
//!                      "(x1 - x2)^2 + (1/x2 + 2)^2 + 0.5*x3^2",
//!                      ["x1 + x2 <= 5", "x1*x3 >= 2"])
//! r = blockalt.multistart(p, n=32, seed=0)
//! print(r.best_point, r.best_cost)
//! ```

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ::blockalt::baselines::{ga_solve, pso_solve, MetaConfig};
use ::blockalt::control::{run_closed_loop as run_loop, ControllerKind, Scenario, Telemetry};
use ::blockalt::io::ProblemFile;
use ::blockalt::sampling::{sample as draw, SamplerConfig};
use ::blockalt::{multistart as ms, Bound as Interval, Method, SamplerMethod, SolverConfig, SolverReport};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Problem", module = "blockalt", frozen)]
struct PyProblem {
    inner: ::blockalt::Problem,
    file: ProblemFile,
}

impl PyProblem {
    fn from_file(file: ProblemFile) -> PyResult<Self> {
        let inner = file.build().map_err(value_err)?;
        Ok(Self { inner, file })
    }

    fn check_dim(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.n() {
            return Err(PyValueError::new_err(format!(
                "point has {} coordinates, problem has {}",
                x.len(),
                self.inner.n()
            )));
        }
        Ok(())
    }
}

#[pymethods]
impl PyProblem {
    /// `bounds` is a list of `(lo, hi)` pairs; constraints use `<=` or `>=`.
    #[new]
    #[pyo3(signature = (bounds, cost, constraints = Vec::new()))]
    fn new(bounds: Vec<(f64, f64)>, cost: String, constraints: Vec<String>) -> PyResult<Self> {
        Self::from_file(ProblemFile {
            bounds: bounds.into_iter().map(|(lo, hi)| Interval::new(lo, hi)).collect(),
            cost,
            constraints,
        })
    }

    /// Parses the text of a problem file.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Self::from_file(ProblemFile::parse(text).map_err(value_err)?)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Self::parse(&text)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn bounds(&self) -> Vec<(f64, f64)> {
        self.file.bounds.iter().map(|b| (b.lo, b.hi)).collect()
    }

    #[getter]
    fn cost_source(&self) -> String {
        self.file.cost.clone()
    }

    #[getter]
    fn constraint_sources(&self) -> Vec<String> {
        self.file.constraints.clone()
    }

    fn cost(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check_dim(&x)?;
        self.inner.cost_at(&x).map_err(value_err)
    }

    #[pyo3(signature = (x, tol = ::blockalt::problem::DEFAULT_FEAS_TOL))]
    fn is_feasible(&self, x: Vec<f64>, tol: f64) -> PyResult<bool> {
        self.check_dim(&x)?;
        Ok(self.inner.is_feasible(&x, tol))
    }

    /// Largest bound residual or constraint value at `x` (`inf` on domain errors).
    fn worst_violation(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check_dim(&x)?;
        Ok(self.inner.check_feasible(&x, 0.0).worst_violation)
    }

    fn to_text(&self) -> String {
        self.file.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(n={}, cost={:?}, constraints={})",
            self.inner.n(),
            self.file.cost,
            self.file.constraints.len()
        )
    }
}

#[pyclass(name = "Solution", module = "blockalt", frozen, get_all)]
struct PySolution {
    point: Vec<f64>,
    cost: f64,
    iterations: usize,
    cycles: usize,
    truncated: bool,
    /// Cost per iteration, start included.
    trace_costs: Vec<f64>,
    /// Coordinate updated per iteration (1-based, 0 for the start).
    trace_coordinates: Vec<usize>,
}

#[pymethods]
impl PySolution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(cost={}, iterations={}, point={:?})",
            self.cost, self.iterations, self.point
        )
    }
}

#[pyclass(name = "Report", module = "blockalt", frozen, get_all)]
struct PyReport {
    method: String,
    best_point: Vec<f64>,
    best_cost: f64,
    winner_index: usize,
    best_infeasible: bool,
    wall_time: f64,
    starts: Vec<Vec<f64>>,
    finals: Vec<Vec<f64>>,
    /// `None` where a start failed.
    final_costs: Vec<Option<f64>>,
    iterations: Vec<usize>,
    winner_trace_costs: Option<Vec<f64>>,
}

impl From<SolverReport> for PyReport {
    fn from(r: SolverReport) -> Self {
        Self {
            method: format!("{:?}", r.method).to_lowercase(),
            best_point: r.best_point,
            best_cost: r.best_cost,
            winner_index: r.winner_index,
            best_infeasible: r.best_infeasible,
            wall_time: r.wall_time,
            starts: r.per_start.iter().map(|s| s.start.clone()).collect(),
            finals: r.per_start.iter().map(|s| s.final_point.clone()).collect(),
            final_costs: r.per_start.iter().map(|s| s.cost).collect(),
            iterations: r.per_start.iter().map(|s| s.iterations).collect(),
            winner_trace_costs: r.winner_trace.map(|t| t.costs().collect()),
        }
    }
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!(
            "Report(method={:?}, best_cost={}, best_point={:?})",
            self.method, self.best_cost, self.best_point
        )
    }
}

#[pyclass(name = "Telemetry", module = "blockalt", frozen, get_all)]
struct PyTelemetry {
    controller: String,
    t: Vec<f64>,
    y: Vec<f64>,
    u: Vec<f64>,
    x1_hat: Vec<f64>,
    x2_hat: Vec<f64>,
    flagged: Vec<bool>,
    flagged_ticks: usize,
    csv: String,
}

impl From<Telemetry> for PyTelemetry {
    fn from(t: Telemetry) -> Self {
        let col = |f: fn(&::blockalt::control::TickRecord) -> f64| t.records.iter().map(f).collect::<Vec<_>>();
        Self {
            controller: t.controller.name().to_string(),
            t: col(|r| r.t),
            y: col(|r| r.y),
            u: col(|r| r.u),
            x1_hat: col(|r| r.x1_hat),
            x2_hat: col(|r| r.x2_hat),
            flagged: t.records.iter().map(|r| r.flagged).collect(),
            flagged_ticks: t.flagged_ticks,
            csv: t.to_csv(),
        }
    }
}

#[pymethods]
impl PyTelemetry {
    fn __len__(&self) -> usize {
        self.t.len()
    }
}

fn solver_config(max_iterations: usize, x_tol: f64, cost_tol: f64) -> SolverConfig {
    SolverConfig {
        max_iterations,
        x_tol,
        cost_tol,
        ..SolverConfig::default()
    }
}

/// Block-alternating iteration from the feasible point `x0`.
#[pyfunction]
#[pyo3(signature = (problem, x0, max_iterations = 1000, x_tol = 1e-8, cost_tol = 1e-10))]
fn solve(
    py: Python<'_>,
    problem: &PyProblem,
    x0: Vec<f64>,
    max_iterations: usize,
    x_tol: f64,
    cost_tol: f64,
) -> PyResult<PySolution> {
    let cfg = solver_config(max_iterations, x_tol, cost_tol);
    let p = &problem.inner;
    let s = py.detach(|| ::blockalt::solve(p, &x0, &cfg)).map_err(value_err)?;
    Ok(PySolution {
        point: s.point,
        cost: s.cost,
        iterations: s.iterations,
        cycles: s.cycles,
        truncated: s.truncated,
        trace_costs: s.trace.costs().collect(),
        trace_coordinates: s.trace.records.iter().map(|r| r.coordinate).collect(),
    })
}

/// Start points as `(point, provenance)` pairs. `method` is one of
/// `hybrid`, `grid`, `lhs`, `monte_carlo`.
#[pyfunction]
#[pyo3(signature = (problem, n, method = "hybrid", seed = 0))]
fn sample(problem: &PyProblem, n: usize, method: &str, seed: u64) -> PyResult<Vec<(Vec<f64>, String)>> {
    let m: SamplerMethod = method.parse().map_err(value_err)?;
    let set = draw(&problem.inner, &SamplerConfig::new(n, m, seed)).map_err(value_err)?;
    Ok(set
        .starts
        .into_iter()
        .map(|s| (s.point, format!("{:?}", s.provenance).to_lowercase()))
        .collect())
}

/// Samples `n` starts and runs `method` (`bai`, `ga` or `pso`) from them.
#[pyfunction]
#[pyo3(signature = (problem, n = 32, seed = 0, sampler = "hybrid", method = "bai", workers = 1, max_iterations = None))]
#[allow(clippy::too_many_arguments)]
fn multistart(
    py: Python<'_>,
    problem: &PyProblem,
    n: usize,
    seed: u64,
    sampler: &str,
    method: &str,
    workers: usize,
    max_iterations: Option<usize>,
) -> PyResult<PyReport> {
    let sm: SamplerMethod = sampler.parse().map_err(value_err)?;
    let m: Method = method.parse().map_err(value_err)?;
    let p = &problem.inner;
    let report = py.detach(|| -> Result<SolverReport, String> {
        let starts = draw(p, &SamplerConfig::new(n, sm, seed)).map_err(|e| e.to_string())?;
        match m {
            Method::Bai => {
                let mut cfg = SolverConfig::default();
                if let Some(k) = max_iterations {
                    cfg.max_iterations = k;
                }
                ms::run(p, &starts, &cfg, workers).map_err(|e| e.to_string())
            }
            Method::Ga | Method::Pso => {
                let cfg = MetaConfig {
                    seed,
                    max_iterations: max_iterations.unwrap_or(MetaConfig::default().max_iterations),
                    ..MetaConfig::default()
                };
                if m == Method::Ga {
                    ga_solve(p, &starts, &cfg)
                } else {
                    pso_solve(p, &starts, &cfg)
                }
            }
        }
    });
    Ok(report.map_err(PyValueError::new_err)?.into())
}

/// Closed-loop thermal run with the `osap` or `lqr` controller.
#[pyfunction]
#[pyo3(signature = (controller = "osap", duration = 600.0, t_amb = 25.0, reference = 50.0, seed = 0, noise = 0.0, theta = 0.01, norm = "root", starts = 16))]
#[allow(clippy::too_many_arguments)]
fn run_closed_loop(
    py: Python<'_>,
    controller: &str,
    duration: f64,
    t_amb: f64,
    reference: f64,
    seed: u64,
    noise: f64,
    theta: f64,
    norm: &str,
    starts: usize,
) -> PyResult<PyTelemetry> {
    let kind = match controller {
        "osap" => ControllerKind::Osap,
        "lqr" => ControllerKind::Lqr,
        other => return Err(PyValueError::new_err(format!("unknown controller `{other}`"))),
    };
    let sc = Scenario {
        duration,
        t_amb,
        reference,
        seed,
        noise,
        theta,
        norm: norm.parse().map_err(value_err)?,
        starts,
        ..Scenario::default()
    };
    let t = py.detach(|| run_loop(&sc, kind)).map_err(value_err)?;
    Ok(t.into())
}

#[pymodule(name = "blockalt")]
fn blockalt_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyTelemetry>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(multistart, m)?)?;
    m.add_function(wrap_pyfunction!(run_closed_loop, m)?)?;
    Ok(())
}
