//! Block-alternating iteration: cycle through the coordinates in order,
//! minimize the cost along each one over its feasible interval, and move
//! only that coordinate.
//!
//! Iteration `k` (1-based) updates coordinate `i = k mod n`, with a zero
//! remainder meaning coordinate `n`. From a feasible start every iterate stays
//! feasible and the cost never increases.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{FeasibilityVerdict, Point, Problem};
use crate::scalar::{feasible_interval, minimize_1d, ScalarConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Cap on coordinate updates.
    pub max_iterations: usize,
    /// Largest coordinate move over a full cycle that still counts as converged.
    pub x_tol: f64,
    /// Largest cost decrease over a full cycle that still counts as converged.
    /// Also the tie window for keeping a coordinate where it is.
    pub cost_tol: f64,
    pub scalar: ScalarConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            x_tol: 1e-8,
            cost_tol: 1e-10,
            scalar: ScalarConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("start point has {got} coordinates, problem has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("start point is infeasible (worst violation {})", .0.worst_violation)]
    InfeasibleStart(FeasibilityVerdict),
    #[error("cost is undefined at the start point: {0}")]
    UndefinedCost(crate::expr::EvalError),
    #[error("invalid solver configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Iteration index; 0 is the start point.
    pub k: usize,
    /// Coordinate updated at this iteration, 1-based; 0 for the start record.
    pub coordinate: usize,
    pub point: Point,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.cost)
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub point: Point,
    pub cost: f64,
    /// Coordinate updates performed.
    pub iterations: usize,
    /// `ceil(iterations / n)`.
    pub cycles: usize,
    /// Stopped at `max_iterations` before the convergence test passed.
    pub truncated: bool,
    /// Coordinate updates where every cost probe hit a domain error.
    pub scalar_warnings: usize,
    pub trace: RunTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub point: Point,
    pub cost: f64,
    pub warning: bool,
}

/// Replaces coordinate `i` (0-based) of a feasible `x` by the minimizer of
/// the restricted subproblem. Other coordinates are copied bit-for-bit.
///
/// `current_cost` is the cost at `x`. The incoming value is kept when the
/// subproblem minimum is not lower by more than `cost_tol`.
pub fn coordinate_step(
    p: &Problem,
    x: &[f64],
    current_cost: f64,
    i: usize,
    cfg: &SolverConfig,
) -> StepOutcome {
    let iv = feasible_interval(p, x, i, &cfg.scalar);
    let sol = minimize_1d(p, x, i, iv, &cfg.scalar);
    let mut point = x.to_vec();
    if sol.cost < current_cost - cfg.cost_tol {
        point[i] = sol.value;
        StepOutcome {
            point,
            cost: sol.cost,
            warning: sol.all_probes_failed,
        }
    } else {
        StepOutcome {
            point,
            cost: current_cost,
            warning: sol.all_probes_failed,
        }
    }
}

/// Runs the cyclic iteration from the feasible point `x0`.
///
/// Stops once a full cycle of `n` consecutive updates moved no coordinate by
/// more than `x_tol` and lowered the cost by at most `cost_tol`, or after
/// `max_iterations` updates (flagged as truncated).
pub fn solve(p: &Problem, x0: &[f64], cfg: &SolverConfig) -> Result<Solution, SolveError> {
    let n = p.n();
    if x0.len() != n {
        return Err(SolveError::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    if !(cfg.x_tol > 0.0 && cfg.cost_tol > 0.0) {
        return Err(SolveError::Config("tolerances must be positive"));
    }
    if cfg.max_iterations < n {
        return Err(SolveError::Config("max_iterations must be at least n"));
    }
    let verdict = p.check_feasible(x0, cfg.scalar.feas_tol);
    if !verdict.feasible {
        return Err(SolveError::InfeasibleStart(verdict));
    }
    let mut cost = p.cost_at(x0).map_err(SolveError::UndefinedCost)?;
    let mut x = x0.to_vec();
    let mut trace = RunTrace {
        records: vec![TraceRecord {
            k: 0,
            coordinate: 0,
            point: x.clone(),
            cost,
        }],
    };
    // Per-iteration coordinate move, for the full-cycle convergence test.
    let mut moves: Vec<f64> = Vec::with_capacity(cfg.max_iterations.min(4096));
    let mut warnings = 0;
    let mut converged = false;
    let mut k = 0;

    while k < cfg.max_iterations {
        k += 1;
        let coordinate = match k % n {
            0 => n,
            r => r,
        };
        let i = coordinate - 1;
        let step = coordinate_step(p, &x, cost, i, cfg);
        warnings += usize::from(step.warning);
        moves.push((step.point[i] - x[i]).abs());
        x = step.point;
        cost = step.cost;
        trace.records.push(TraceRecord {
            k,
            coordinate,
            point: x.clone(),
            cost,
        });

        if k >= n {
            let max_move = moves[k - n..].iter().cloned().fold(0.0, f64::max);
            let decrease = trace.records[k - n].cost - cost;
            if max_move <= cfg.x_tol && decrease <= cfg.cost_tol {
                converged = true;
                break;
            }
        }
    }

    Ok(Solution {
        point: x,
        cost,
        iterations: k,
        cycles: k.div_ceil(n),
        truncated: !converged,
        scalar_warnings: warnings,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::fixtures::{bench3, basin};
    use crate::problem::Bound;

    #[test]
    fn bench3_pinned_point_is_unchanged_by_x1_step() {
        let p = bench3();
        let x = [2.0, 3.0, 1.0];
        let c = p.cost_at(&x).unwrap();
        let out = coordinate_step(&p, &x, c, 0, &SolverConfig::default());
        assert_eq!(out.point, x.to_vec());
        assert_eq!(out.cost, c);
    }

    #[test]
    fn basin_x2_stays_at_vertex() {
        let p = basin();
        let x = [1.2, 1.2];
        let c = p.cost_at(&x).unwrap();
        let out = coordinate_step(&p, &x, c, 1, &SolverConfig::default());
        assert_eq!(out.point, x.to_vec());
    }

    #[test]
    fn unreferenced_coordinate_keeps_value() {
        let p = Problem::from_sources(
            vec![Bound::new(-1.0, 1.0), Bound::new(-1.0, 1.0)],
            "x1^2",
            &[] as &[&str],
        )
        .unwrap();
        let x = [0.5, 0.25];
        let out = coordinate_step(&p, &x, 0.25, 1, &SolverConfig::default());
        assert_eq!(out.point[1].to_bits(), 0.25f64.to_bits());
        assert_eq!(out.point[0].to_bits(), 0.5f64.to_bits());
    }

    #[test]
    fn other_coordinates_bit_identical() {
        let p = bench3();
        let x = [2.4, 2.3, 0.95];
        let c = p.cost_at(&x).unwrap();
        for i in 0..3 {
            let out = coordinate_step(&p, &x, c, i, &SolverConfig::default());
            for j in (0..3).filter(|&j| j != i) {
                assert_eq!(out.point[j].to_bits(), x[j].to_bits());
            }
        }
    }

    #[test]
    fn difference_of_squares_lands_on_diagonal() {
        let p = Problem::from_sources(
            vec![Bound::new(-5.0, 5.0), Bound::new(-5.0, 5.0)],
            "(x1 - x2)^2",
            &[] as &[&str],
        )
        .unwrap();
        let s = solve(&p, &[3.0, -1.5], &SolverConfig::default()).unwrap();
        assert!((s.point[0] + 1.5).abs() < 1e-8, "{:?}", s.point);
        assert_eq!(s.point[1], -1.5);
        assert!(s.cost < 1e-15);
        assert!(!s.truncated);
    }

    #[test]
    fn single_variable_reduces_to_scalar_minimization() {
        let p = Problem::from_sources(vec![Bound::new(-2.0, 4.0)], "(x1 - 1.25)^2 + 3", &[] as &[&str])
            .unwrap();
        let s = solve(&p, &[-2.0], &SolverConfig::default()).unwrap();
        assert!((s.point[0] - 1.25).abs() < 1e-7, "{:?}", s);
        assert!(s.iterations <= 2);
        assert_eq!(s.trace.records[1].coordinate, 1);
    }

    #[test]
    fn infeasible_start_rejected() {
        let err = solve(&bench3(), &[0.0, 2.0, 0.0], &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, SolveError::InfeasibleStart(_)));
        assert!(matches!(
            solve(&bench3(), &[2.0, 3.0], &SolverConfig::default()),
            Err(SolveError::Dimension { .. })
        ));
    }

    #[test]
    fn coordinate_schedule_follows_remainder_rule() {
        let s = solve(&bench3(), &[2.9, 2.05, 0.9], &SolverConfig::default()).unwrap();
        for r in &s.trace.records[1..] {
            let expected = if r.k % 3 == 0 { 3 } else { r.k % 3 };
            assert_eq!(r.coordinate, expected);
        }
    }

    #[test]
    fn truncation_returns_best_so_far() {
        let cfg = SolverConfig {
            max_iterations: 3,
            ..SolverConfig::default()
        };
        let s = solve(&bench3(), &[2.9, 2.05, 0.9], &cfg).unwrap();
        assert!(s.truncated);
        assert_eq!(s.iterations, 3);
        assert!(s.cost <= bench3().cost_at(&[2.9, 2.05, 0.9]).unwrap());
    }

    #[test]
    fn restart_from_converged_point_is_a_fixed_point() {
        let p = bench3();
        let cfg = SolverConfig::default();
        let first = solve(&p, &[2.9, 2.05, 0.9], &cfg).unwrap();
        let again = solve(&p, &first.point, &cfg).unwrap();
        assert_eq!(again.iterations, p.n());
        assert_eq!(again.point, first.point);
    }
}
