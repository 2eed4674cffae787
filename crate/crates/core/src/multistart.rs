//! Independent block-alternating runs from every start point, reduced to a
//! single report in a completion-order independent way.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{Point, Problem};
use crate::sampling::StartSet;
use crate::solver::{solve, RunTrace, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Block-alternating iteration.
    Bai,
    Ga,
    Pso,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bai" => Ok(Self::Bai),
            "ga" => Ok(Self::Ga),
            "pso" => Ok(Self::Pso),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub start: Point,
    /// Final point; equals `start` when the run failed.
    #[serde(rename = "final")]
    pub final_point: Point,
    /// Final cost; `None` when the run failed or never became feasible.
    pub cost: Option<f64>,
    pub iterations: usize,
    pub truncated: bool,
    pub error: Option<String>,
    /// Cost after every iteration, start included.
    pub cost_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub method: Method,
    pub best_point: Point,
    pub best_cost: f64,
    pub winner_index: usize,
    /// Full trace of the winning run (block-alternating only).
    pub winner_trace: Option<RunTrace>,
    pub per_start: Vec<StartOutcome>,
    /// The best point is infeasible (metaheuristics only).
    pub best_infeasible: bool,
    pub wall_time: f64,
}

impl SolverReport {
    /// Field-wise equality ignoring `wall_time`.
    pub fn same_result(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_time = other.wall_time;
        &a == other
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MultistartError {
    #[error("no start points")]
    NoStarts,
    #[error("workers must be at least 1")]
    NoWorkers,
    #[error("every start failed; first error: {0}")]
    AllFailed(String),
}

/// Index of the winner among `(cost, iterations)` pairs: lowest cost, with
/// costs within `cost_tol` of the minimum tied and broken by fewer
/// iterations, then lower index.
pub(crate) fn pick_winner(entries: &[(Option<f64>, usize)], cost_tol: f64) -> Option<usize> {
    let min = entries
        .iter()
        .filter_map(|(c, _)| *c)
        .min_by(f64::total_cmp)?;
    entries
        .iter()
        .enumerate()
        .filter(|(_, (c, _))| c.is_some_and(|c| c <= min + cost_tol))
        .min_by_key(|(k, (_, it))| (*it, *k))
        .map(|(k, _)| k)
}

pub(crate) fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    if workers <= 1 {
        return job();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

/// Solves from every start on up to `workers` threads. The report is the
/// same for every `workers` value apart from `wall_time`.
pub fn run(
    p: &Problem,
    starts: &StartSet,
    cfg: &SolverConfig,
    workers: usize,
) -> Result<SolverReport, MultistartError> {
    if starts.is_empty() {
        return Err(MultistartError::NoStarts);
    }
    if workers == 0 {
        return Err(MultistartError::NoWorkers);
    }
    let t0 = Instant::now();
    let points: Vec<&Point> = starts.points().collect();
    let results = with_workers(workers, || {
        if workers <= 1 {
            points.iter().map(|x0| solve(p, x0, cfg)).collect::<Vec<_>>()
        } else {
            points.par_iter().map(|x0| solve(p, x0, cfg)).collect::<Vec<_>>()
        }
    });

    let mut per_start = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for (x0, res) in points.iter().zip(results) {
        match res {
            Ok(sol) => {
                per_start.push(StartOutcome {
                    start: (*x0).clone(),
                    final_point: sol.point,
                    cost: Some(sol.cost),
                    iterations: sol.iterations,
                    truncated: sol.truncated,
                    error: None,
                    cost_history: sol.trace.costs().collect(),
                });
                traces.push(Some(sol.trace));
            }
            Err(e) => {
                per_start.push(StartOutcome {
                    start: (*x0).clone(),
                    final_point: (*x0).clone(),
                    cost: None,
                    iterations: 0,
                    truncated: false,
                    error: Some(e.to_string()),
                    cost_history: Vec::new(),
                });
                traces.push(None);
            }
        }
    }

    let keys: Vec<(Option<f64>, usize)> = per_start.iter().map(|s| (s.cost, s.iterations)).collect();
    let Some(winner) = pick_winner(&keys, cfg.cost_tol) else {
        let first = per_start
            .iter()
            .find_map(|s| s.error.clone())
            .unwrap_or_default();
        return Err(MultistartError::AllFailed(first));
    };

    Ok(SolverReport {
        method: Method::Bai,
        best_point: per_start[winner].final_point.clone(),
        best_cost: per_start[winner].cost.unwrap_or(f64::NAN),
        winner_index: winner,
        winner_trace: traces.swap_remove(winner),
        per_start,
        best_infeasible: false,
        wall_time: t0.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::fixtures::bench3;
    use crate::problem::Bound;
    use crate::sampling::{sample, Provenance, SamplerConfig, SamplerMethod};

    #[test]
    fn winner_rule() {
        assert_eq!(pick_winner(&[(Some(1.0), 5), (Some(0.5), 9), (Some(0.5), 3)], 1e-10), Some(2));
        assert_eq!(pick_winner(&[(Some(0.0), 4), (Some(0.0), 4)], 1e-10), Some(0));
        assert_eq!(pick_winner(&[(None, 1), (Some(2.0), 7)], 1e-10), Some(1));
        assert_eq!(pick_winner(&[(None, 1)], 1e-10), None);
    }

    #[test]
    fn difference_of_squares_ties_go_to_lowest_index() {
        let p = Problem::from_sources(
            vec![Bound::new(-5.0, 5.0), Bound::new(-5.0, 5.0)],
            "(x1 - x2)^2",
            &[] as &[&str],
        )
        .unwrap();
        let starts = StartSet::from_points(
            vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![4.0, -4.0], vec![0.0, 3.0]],
            Provenance::Grid,
        );
        let r = run(&p, &starts, &SolverConfig::default(), 1).unwrap();
        assert_eq!(r.winner_index, 0);
        let finals: Vec<f64> = r.per_start.iter().map(|s| s.final_point[1]).collect();
        assert_eq!(finals, vec![2.0, 0.5, -4.0, 3.0]);
        assert!(r.per_start.iter().all(|s| s.cost.unwrap() < 1e-15));
    }

    #[test]
    fn single_start_reduces_to_solve() {
        let p = bench3();
        let starts = StartSet::from_points(vec![vec![2.9, 2.05, 0.9]], Provenance::Lhs);
        let r = run(&p, &starts, &SolverConfig::default(), 1).unwrap();
        let s = solve(&p, &[2.9, 2.05, 0.9], &SolverConfig::default()).unwrap();
        assert_eq!(r.best_point, s.point);
        assert_eq!(r.winner_trace.unwrap(), s.trace);
    }

    #[test]
    fn failed_starts_are_isolated() {
        let p = bench3();
        let starts = StartSet::from_points(
            vec![vec![0.0, 2.0, 0.0], vec![2.9, 2.05, 0.9]],
            Provenance::Lhs,
        );
        let r = run(&p, &starts, &SolverConfig::default(), 2).unwrap();
        assert_eq!(r.winner_index, 1);
        assert!(r.per_start[0].error.is_some());

        let bad = StartSet::from_points(vec![vec![0.0, 2.0, 0.0]], Provenance::Lhs);
        assert!(matches!(
            run(&p, &bad, &SolverConfig::default(), 1),
            Err(MultistartError::AllFailed(_))
        ));
    }

    #[test]
    fn workers_do_not_change_the_report() {
        let p = bench3();
        let starts = sample(&p, &SamplerConfig::new(16, SamplerMethod::Hybrid, 4)).unwrap();
        let a = run(&p, &starts, &SolverConfig::default(), 1).unwrap();
        let b = run(&p, &starts, &SolverConfig::default(), 8).unwrap();
        assert!(a.same_result(&b));
        for s in &a.per_start {
            assert!(a.best_cost <= s.cost.unwrap() + 1e-10);
        }
    }
}
