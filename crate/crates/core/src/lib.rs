//! Block-alternating coordinate optimization for constrained problems that
//! are non-convex jointly but convex in each variable separately.
//!
//! The pieces:
//!
//! * [`expr`] parses costs and constraints written as text.
//! * [`problem`] holds an instance: box bounds, cost, constraints `g_j <= 0`.
//! * [`scalar`] solves the one-coordinate subproblem.
//! * [`solver`] cycles through the coordinates until nothing moves.
//! * [`sampling`] and [`multistart`] pick feasible starts and run from each.
//! * [`baselines`] has GA and PSO for comparison.
//! * [`control`] is a closed-loop thermal demo that solves a Lyapunov
//!   constrained one-step predictive control problem every tick.

pub mod baselines;
pub mod control;
pub mod expr;
pub mod io;
pub mod multistart;
pub mod problem;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod solver;

pub use expr::{EvalError, Expr, ParseError};
pub use multistart::{Method, SolverReport};
pub use problem::{Bound, FeasibilityVerdict, Point, Problem};
pub use sampling::{SamplerConfig, SamplerMethod, StartSet};
pub use solver::{solve, RunTrace, Solution, SolverConfig};
