//! Closed-loop thermal demo.
//!
//! A lumped heater (convection, radiation, transistor heating) is driven at
//! 0.5 s ticks by one of two controllers that share a discrete linear model
//! and a Luenberger observer:
//!
//! * `osap`: one-step-ahead predictive control. Every tick solves for the
//!   input `u` and a Lyapunov matrix `P` with the block-alternating solver,
//!   decision vector `(u, p11, p22, p12)`.
//! * `lqr`: infinite-horizon discrete LQR around the same steady-state target.
//!
//! Temperatures are in degrees Celsius except inside the plant, which
//! integrates in kelvin.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Matrix2, Matrix3, RowVector2, Vector2, Vector3};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::EvalError;
use crate::multistart;
use crate::problem::{Bound, FnObjective, Objective, Problem};
use crate::rng::{self, Purpose};
use crate::sampling::{sample, Provenance, SamplerConfig, SamplerMethod, StartPoint};
use crate::solver::SolverConfig;

pub const KELVIN: f64 = 273.15;
/// Sample period of the linear model and the control loop, seconds.
pub const PERIOD: f64 = 0.5;
/// Internal RK4 step of the plant integrator, seconds.
pub const RK4_STEP: f64 = 0.01;
pub const OBSERVER_GAIN: [f64; 2] = [0.85, 0.9];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("steady-state system is singular")]
    SingularTarget,
    #[error("Riccati iteration did not converge")]
    RiccatiDivergence,
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

/// Heater parameters, SI units. `t_amb` is in kelvin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub mass: f64,
    pub heat_capacity: f64,
    pub transfer_coeff: f64,
    pub area: f64,
    pub t_amb: f64,
    pub emissivity: f64,
    pub stefan_boltzmann: f64,
    /// Watts dissipated per percent of heater output.
    pub alpha: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            mass: 0.004,
            heat_capacity: 500.0,
            transfer_coeff: 10.0,
            area: 12e-4,
            t_amb: 25.0 + KELVIN,
            emissivity: 0.9,
            stefan_boltzmann: 5.67e-8,
            alpha: 0.01,
        }
    }
}

impl PlantParams {
    pub fn with_ambient_celsius(t_amb: f64) -> Self {
        Self {
            t_amb: t_amb + KELVIN,
            ..Self::default()
        }
    }
}

/// `dT/dt` in K/s at temperature `t` (K) and heater output `q` (%).
pub fn plant_rhs(p: &PlantParams, t: f64, q: f64) -> f64 {
    let convection = p.transfer_coeff * p.area * (p.t_amb - t);
    let radiation = p.emissivity * p.stefan_boltzmann * p.area * (p.t_amb.powi(4) - t.powi(4));
    (convection + radiation + p.alpha * q) / (p.mass * p.heat_capacity)
}

/// Advances the plant by `dt` seconds with `q` held constant, classical RK4
/// with steps of at most [`RK4_STEP`].
pub fn plant_step(p: &PlantParams, t: f64, q: f64, dt: f64) -> f64 {
    if dt <= 0.0 {
        return t;
    }
    let steps = (dt / RK4_STEP - 1e-9).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    let mut t = t;
    for _ in 0..steps {
        let k1 = plant_rhs(p, t, q);
        let k2 = plant_rhs(p, t + 0.5 * h * k1, q);
        let k3 = plant_rhs(p, t + 0.5 * h * k2, q);
        let k4 = plant_rhs(p, t + h * k3, q);
        t += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    t
}

/// Discrete model `x+ = A x + B u`, `y = C x + t_amb` (degrees Celsius).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub c: RowVector2<f64>,
    pub t_amb: f64,
    pub period: f64,
}

impl Default for LinearModel {
    fn default() -> Self {
        Self {
            a: Matrix2::new(0.0, -0.0005, 1.0, -0.0965),
            b: Vector2::new(0.0004, 0.0),
            c: RowVector2::new(0.0, 1.0),
            t_amb: 25.0,
            period: PERIOD,
        }
    }
}

impl LinearModel {
    pub fn with_ambient(t_amb: f64) -> Self {
        Self {
            t_amb,
            ..Self::default()
        }
    }

    pub fn predict(&self, x: &Vector2<f64>, u: f64) -> Vector2<f64> {
        self.a * x + self.b * u
    }

    pub fn output(&self, x: &Vector2<f64>) -> f64 {
        (self.c * x)[0] + self.t_amb
    }
}

/// Luenberger update `x+ = A x + B u + L (y - t_amb - C x)`.
pub fn observer_step(
    model: &LinearModel,
    gain: &Vector2<f64>,
    x_hat: &Vector2<f64>,
    u: f64,
    y: f64,
) -> Vector2<f64> {
    let innovation = y - model.output(x_hat);
    model.predict(x_hat, u) + gain * innovation
}

/// Steady state `(x, u)` with `x = A x + B u` and output `r`.
pub fn equilibrium_target(model: &LinearModel, r: f64) -> Result<(Vector2<f64>, f64), ControlError> {
    let am = model.a - Matrix2::identity();
    let m = Matrix3::new(
        am[(0, 0)], am[(0, 1)], model.b[0],
        am[(1, 0)], am[(1, 1)], model.b[1],
        model.c[0], model.c[1], 0.0,
    );
    let rhs = Vector3::new(0.0, 0.0, r - model.t_amb);
    let sol = m.lu().solve(&rhs).ok_or(ControlError::SingularTarget)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return Err(ControlError::SingularTarget);
    }
    Ok((Vector2::new(sol[0], sol[1]), sol[2]))
}

/// Infinite-horizon discrete LQR gain `K` (control `u = -K x`), from the
/// Riccati recursion iterated until the largest entry change is below
/// `1e-12` relative to the solution.
pub fn lqr_baseline(
    model: &LinearModel,
    qx: &Matrix2<f64>,
    qu: f64,
) -> Result<RowVector2<f64>, ControlError> {
    let (a, b) = (model.a, model.b);
    let mut p = *qx;
    for _ in 0..1_000_000 {
        let bp = b.transpose() * p;
        let s = qu + (bp * b)[0];
        let k = (bp * a) / s;
        let next = qx + a.transpose() * p * a - (a.transpose() * p * b) * k;
        let next = 0.5 * (next + next.transpose());
        if !next.iter().all(|v| v.is_finite()) {
            return Err(ControlError::RiccatiDivergence);
        }
        let change = (next - p).amax();
        p = next;
        if change <= 1e-12 * p.amax().max(1.0) {
            let bp = b.transpose() * p;
            return Ok((bp * a) / (qu + (bp * b)[0]));
        }
    }
    Err(ControlError::RiccatiDivergence)
}

/// How `V(x, P) = ||x - x_bar||_P` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovNorm {
    /// `sqrt(e' P e)`.
    Root,
    /// `e' P e`.
    Squared,
}

impl std::str::FromStr for LyapunovNorm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "root" => Ok(Self::Root),
            "squared" => Ok(Self::Squared),
            other => Err(format!("unknown norm `{other}` (expected root or squared)")),
        }
    }
}

fn quad(p: &Matrix2<f64>, e: &Vector2<f64>) -> f64 {
    (e.transpose() * p * e)[0]
}

fn lyapunov(norm: LyapunovNorm, p: &Matrix2<f64>, e: &Vector2<f64>) -> Result<f64, EvalError> {
    let q = quad(p, e);
    match norm {
        LyapunovNorm::Squared => Ok(q),
        LyapunovNorm::Root if q >= 0.0 => Ok(q.sqrt()),
        LyapunovNorm::Root if q > -1e-300 => Ok(0.0),
        LyapunovNorm::Root => Err(EvalError::Domain {
            op: "sqrt",
            operand: q,
        }),
    }
}

/// `P` from the decision vector `(u, p11, p22, p12)`.
pub fn lyapunov_matrix(z: &[f64]) -> Matrix2<f64> {
    Matrix2::new(z[1], z[3], z[3], z[2])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OsapConfig {
    pub qx: [f64; 2],
    pub qu: f64,
    pub theta: f64,
    /// Positive-definiteness margin on `p11`, `p22` and `det P`.
    pub delta: f64,
    /// Margin that makes the Lyapunov decrease strict.
    pub delta_c: f64,
    pub norm: LyapunovNorm,
    /// Box for the entries of `P`: `p11, p22 <= p_max`, `|p12| <= p_max`.
    pub p_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Start points per tick, warm start included.
    pub starts: usize,
    /// Grid node cap for the hybrid sampler.
    pub grid_cap: usize,
    pub workers: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for OsapConfig {
    fn default() -> Self {
        Self {
            qx: [0.1, 10.0],
            qu: 0.001,
            theta: 0.01,
            delta: 1e-6,
            delta_c: 1e-9,
            norm: LyapunovNorm::Root,
            p_max: 100.0,
            u_min: 0.0,
            u_max: 100.0,
            starts: 16,
            grid_cap: 10_000,
            workers: 1,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl OsapConfig {
    pub fn qx_matrix(&self) -> Matrix2<f64> {
        Matrix2::from_diagonal(&Vector2::new(self.qx[0], self.qx[1]))
    }
}

/// Controller memory between ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub x_hat: Vector2<f64>,
    pub p_prev: Matrix2<f64>,
    pub u_prev: f64,
    pub reference: f64,
    pub x_bar: Vector2<f64>,
    pub u_bar: f64,
}

impl ControllerState {
    pub fn new(model: &LinearModel, reference: f64) -> Result<Self, ControlError> {
        let (x_bar, u_bar) = equilibrium_target(model, reference)?;
        Ok(Self {
            x_hat: Vector2::zeros(),
            p_prev: Matrix2::identity(),
            u_prev: 0.0,
            reference,
            x_bar,
            u_bar,
        })
    }
}

/// Left side of the Lyapunov decrease condition
/// `V(x+, P) - V(x_hat, P) + theta * V(x_hat, P)`; accepted when `<= 0`.
pub fn lyapunov_residual(
    model: &LinearModel,
    state: &ControllerState,
    cfg: &OsapConfig,
    u: f64,
    p: &Matrix2<f64>,
) -> Result<f64, EvalError> {
    let e = state.x_hat - state.x_bar;
    let e_next = model.predict(&state.x_hat, u) - state.x_bar;
    let v_now = lyapunov(cfg.norm, p, &e)?;
    let v_next = lyapunov(cfg.norm, p, &e_next)?;
    Ok(v_next - (1.0 - cfg.theta) * v_now)
}

/// The per-tick optimization problem over `(u, p11, p22, p12)`.
pub fn tracking_problem(model: &LinearModel, state: &ControllerState, cfg: &OsapConfig) -> Problem {
    let bounds = vec![
        Bound::new(cfg.u_min, cfg.u_max),
        Bound::new(cfg.delta, cfg.p_max),
        Bound::new(cfg.delta, cfg.p_max),
        Bound::new(-cfg.p_max, cfg.p_max),
    ];
    let (m, st, c) = (*model, state.clone(), *cfg);
    let qx = cfg.qx_matrix();
    let cost = FnObjective::new("tracking cost", move |z: &[f64]| {
        let x_next = m.predict(&st.x_hat, z[0]);
        let du = z[0] - st.u_bar;
        let v = lyapunov(c.norm, &lyapunov_matrix(z), &(st.x_hat - st.x_bar))?;
        Ok(quad(&qx, &(x_next - st.x_bar)) + c.qu * du * du + v)
    });
    let delta = cfg.delta;
    let pd = FnObjective::new("delta - det P <= 0", move |z: &[f64]| {
        Ok(delta - (z[1] * z[2] - z[3] * z[3]))
    });
    let (m, st, c) = (*model, state.clone(), *cfg);
    // At the target itself the strict decrease is unattainable; drop the margin.
    let margin = if state.x_hat == state.x_bar { 0.0 } else { cfg.delta_c };
    let decrease = FnObjective::new("Lyapunov decrease", move |z: &[f64]| {
        Ok(lyapunov_residual(&m, &st, &c, z[0], &lyapunov_matrix(z))? + margin)
    });
    Problem::new(
        bounds,
        Arc::new(cost),
        vec![Arc::new(pd) as Arc<dyn Objective>, Arc::new(decrease)],
    )
    .expect("controller bounds are valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSolution {
    pub u: f64,
    /// `[p11, p22, p12]`.
    pub p: [f64; 3],
    /// Iterations of the winning run.
    pub iterations: usize,
    pub starts: usize,
    /// No feasible solution this tick; `u` is the previous input.
    pub flagged: bool,
    pub residual: f64,
}

fn is_positive_definite(p: &Matrix2<f64>) -> bool {
    p.cholesky().is_some()
}

/// Solves the tick problem from a warm start plus hybrid samples and returns
/// the input to apply. `tick` offsets the sampler seed.
pub fn controller_step(
    model: &LinearModel,
    state: &ControllerState,
    cfg: &OsapConfig,
    tick: u64,
) -> TickSolution {
    let problem = tracking_problem(model, state, cfg);
    let fallback = |starts: usize| TickSolution {
        u: state.u_prev,
        p: [state.p_prev[(0, 0)], state.p_prev[(1, 1)], state.p_prev[(0, 1)]],
        iterations: 0,
        starts,
        flagged: true,
        residual: f64::NAN,
    };

    let warm = vec![
        state.u_prev.clamp(cfg.u_min, cfg.u_max),
        state.p_prev[(0, 0)].clamp(cfg.delta, cfg.p_max),
        state.p_prev[(1, 1)].clamp(cfg.delta, cfg.p_max),
        state.p_prev[(0, 1)].clamp(-cfg.p_max, cfg.p_max),
    ];
    let warm_ok = problem.is_feasible(&warm, cfg.solver.scalar.feas_tol);
    let wanted = cfg.starts.saturating_sub(usize::from(warm_ok));
    let mut sampler = SamplerConfig::new(wanted.max(1), SamplerMethod::Hybrid, cfg.seed.wrapping_add(tick));
    sampler.grid_candidate_cap = cfg.grid_cap;
    sampler.feas_tol = cfg.solver.scalar.feas_tol;

    let mut set = match sample(&problem, &sampler) {
        Ok(s) => s,
        Err(_) if warm_ok => crate::sampling::StartSet::from_points(Vec::new(), Provenance::Supplied),
        Err(_) => return fallback(0),
    };
    if wanted == 0 {
        set.starts.clear();
    }
    if warm_ok {
        set.starts.insert(
            0,
            StartPoint {
                point: warm,
                provenance: Provenance::Supplied,
                fallback: false,
            },
        );
    }
    let n_starts = set.len();
    let Ok(report) = multistart::run(&problem, &set, &cfg.solver, cfg.workers.max(1)) else {
        return fallback(n_starts);
    };

    let z = &report.best_point;
    let p = lyapunov_matrix(z);
    let residual = lyapunov_residual(model, state, cfg, z[0], &p).unwrap_or(f64::INFINITY);
    if !(is_positive_definite(&p) && residual <= 0.0) {
        return fallback(n_starts);
    }
    TickSolution {
        u: z[0],
        p: [z[1], z[2], z[3]],
        iterations: report.per_start[report.winner_index].iterations,
        starts: n_starts,
        flagged: false,
        residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Osap,
    Lqr,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Osap => "osap",
            Self::Lqr => "lqr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerChoice {
    Osap,
    Lqr,
    Both,
}

impl ControllerChoice {
    pub fn kinds(self) -> Vec<ControllerKind> {
        match self {
            Self::Osap => vec![ControllerKind::Osap],
            Self::Lqr => vec![ControllerKind::Lqr],
            Self::Both => vec![ControllerKind::Osap, ControllerKind::Lqr],
        }
    }
}

impl std::str::FromStr for ControllerChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "osap" => Ok(Self::Osap),
            "lqr" => Ok(Self::Lqr),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown controller `{other}` (expected osap, lqr or both)")),
        }
    }
}

/// A closed-loop run description. Temperatures in degrees Celsius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub controller: ControllerChoice,
    /// Seconds.
    pub duration: f64,
    pub t_amb: f64,
    pub reference: f64,
    pub seed: u64,
    /// Standard deviation of additive measurement noise; 0 disables it.
    pub noise: f64,
    pub theta: f64,
    pub norm: LyapunovNorm,
    pub starts: usize,
    pub workers: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            controller: ControllerChoice::Both,
            duration: 600.0,
            t_amb: 25.0,
            reference: 50.0,
            seed: 0,
            noise: 0.0,
            theta: 0.01,
            norm: LyapunovNorm::Root,
            starts: 16,
            workers: 1,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::Scenario(m.to_string()));
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return bad("duration must be a non-negative number of seconds");
        }
        if !(self.t_amb.is_finite() && self.t_amb + KELVIN > 0.0) {
            return bad("t_amb must be above absolute zero");
        }
        if !self.reference.is_finite() {
            return bad("reference must be finite");
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad("noise must be non-negative");
        }
        if !(self.theta.is_finite() && self.theta > 0.0 && self.theta < 1.0) {
            return bad("theta must lie in (0, 1)");
        }
        if self.starts == 0 {
            return bad("starts must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        Ok(())
    }

    pub fn osap_config(&self) -> OsapConfig {
        OsapConfig {
            theta: self.theta,
            norm: self.norm,
            starts: self.starts,
            workers: self.workers,
            seed: self.seed,
            ..OsapConfig::default()
        }
    }

    pub fn ticks(&self) -> usize {
        (self.duration / PERIOD + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub y: f64,
    pub u: f64,
    /// Estimate used for this tick's decision.
    pub x1_hat: f64,
    pub x2_hat: f64,
    pub solver_iterations: usize,
    /// Seconds spent computing `u`.
    pub tick_time: f64,
    pub flagged: bool,
    /// `[p11, p22, p12]` (osap only).
    pub p: Option<[f64; 3]>,
    /// Lyapunov decrease residual (osap only).
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub controller: ControllerKind,
    pub scenario: Scenario,
    pub x_bar: [f64; 2],
    pub u_bar: f64,
    /// LQR gain (lqr only).
    pub gain: Option<[f64; 2]>,
    pub records: Vec<TickRecord>,
    pub flagged_ticks: usize,
}

impl Telemetry {
    pub const CSV_HEADER: &'static str = "t,y,u,x1_hat,x2_hat,solver_iterations,tick_time";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.t, r.y, r.u, r.x1_hat, r.x2_hat, r.solver_iterations, r.tick_time
            ));
        }
        out
    }

    /// Zeroes wall-clock fields so runs compare bit for bit.
    pub fn strip_timing(&mut self) {
        for r in &mut self.records {
            r.tick_time = 0.0;
        }
    }

    pub fn inputs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.u).collect()
    }

    pub fn outputs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }
}

/// Runs the loop: measure, decide, update the observer, advance the plant.
pub fn run_closed_loop(sc: &Scenario, kind: ControllerKind) -> Result<Telemetry, ControlError> {
    sc.validate()?;
    let plant = PlantParams::with_ambient_celsius(sc.t_amb);
    let model = LinearModel::with_ambient(sc.t_amb);
    let gain_l = Vector2::new(OBSERVER_GAIN[0], OBSERVER_GAIN[1]);
    let cfg = sc.osap_config();
    let mut state = ControllerState::new(&model, sc.reference)?;
    let k_lqr = match kind {
        ControllerKind::Lqr => Some(lqr_baseline(&model, &cfg.qx_matrix(), cfg.qu)?),
        ControllerKind::Osap => None,
    };
    let noise = (sc.noise > 0.0).then(|| Normal::new(0.0, sc.noise).expect("noise is finite"));
    let mut noise_rng = rng::stream(sc.seed, Purpose::Noise, 0);

    let mut temp = plant.t_amb;
    let mut records = Vec::with_capacity(sc.ticks());
    let mut flagged_ticks = 0;
    for tick in 0..sc.ticks() {
        let mut y = temp - KELVIN;
        if let Some(d) = &noise {
            y += d.sample(&mut noise_rng);
        }
        let started = Instant::now();
        let (u, iterations, flagged, p, residual) = match k_lqr {
            Some(k) => {
                let u = state.u_bar - (k * (state.x_hat - state.x_bar))[0];
                (u.clamp(cfg.u_min, cfg.u_max), 0, false, None, None)
            }
            None => {
                let s = controller_step(&model, &state, &cfg, tick as u64);
                if !s.flagged {
                    state.p_prev = Matrix2::new(s.p[0], s.p[2], s.p[2], s.p[1]);
                }
                let residual = (!s.flagged).then_some(s.residual);
                (s.u, s.iterations, s.flagged, Some(s.p), residual)
            }
        };
        let tick_time = started.elapsed().as_secs_f64();
        flagged_ticks += usize::from(flagged);
        records.push(TickRecord {
            t: tick as f64 * PERIOD,
            y,
            u,
            x1_hat: state.x_hat[0],
            x2_hat: state.x_hat[1],
            solver_iterations: iterations,
            tick_time,
            flagged,
            p,
            residual,
        });
        state.x_hat = observer_step(&model, &gain_l, &state.x_hat, u, y);
        state.u_prev = u;
        temp = plant_step(&plant, temp, u, PERIOD);
    }

    Ok(Telemetry {
        controller: kind,
        scenario: *sc,
        x_bar: [state.x_bar[0], state.x_bar[1]],
        u_bar: state.u_bar,
        gain: k_lqr.map(|k| [k[0], k[1]]),
        records,
        flagged_ticks,
    })
}
