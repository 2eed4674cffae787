//! Genetic algorithm and particle swarm baselines on the same start sets.
//!
//! Both minimize the penalized fitness `cost + w * sum(max(0, g_j)^2)` and
//! clip positions to the box. Each population slot (individual index or
//! particle) remembers the best strictly feasible point it ever held; the
//! report is built from those per-slot bests.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::multistart::{pick_winner, Method, SolverReport, StartOutcome};
use crate::problem::{Point, Problem, DEFAULT_FEAS_TOL};
use crate::rng::{self, Purpose};
use crate::sampling::StartSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    /// Generations (GA) or swarm updates (PSO).
    pub max_iterations: usize,
    pub penalty_weight: f64,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of the box width.
    pub mutation_sigma: f64,
    pub tournament_size: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity limit as a fraction of the box width.
    pub velocity_clamp: f64,
    pub seed: u64,
    pub feas_tol: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            penalty_weight: 1e6,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            mutation_sigma: 0.05,
            tournament_size: 2,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            velocity_clamp: 0.2,
            seed: 0,
            feas_tol: DEFAULT_FEAS_TOL,
        }
    }
}

impl MetaConfig {
    fn validate(&self) -> Result<(), &'static str> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.crossover_rate) && unit(self.mutation_rate)) {
            return Err("rates must lie in [0, 1]");
        }
        if !(self.penalty_weight > 0.0) || self.tournament_size == 0 {
            return Err("penalty weight and tournament size must be positive");
        }
        if self.mutation_sigma < 0.0 || self.velocity_clamp < 0.0 {
            return Err("mutation sigma and velocity clamp must be non-negative");
        }
        Ok(())
    }
}

/// Penalized fitness. Equals the cost exactly at feasible points.
pub fn penalized_fitness(p: &Problem, x: &[f64], weight: f64) -> f64 {
    let Ok(cost) = p.cost_at(x) else {
        return f64::INFINITY;
    };
    let violation = p.squared_violation(x);
    if violation == 0.0 {
        cost
    } else {
        cost + weight * violation
    }
}

fn clip(p: &Problem, x: &mut [f64]) {
    for (v, b) in x.iter_mut().zip(p.bounds()) {
        *v = v.clamp(b.lo, b.hi);
    }
}

/// Per-slot bookkeeping shared by both baselines.
struct Slots<'a> {
    problem: &'a Problem,
    feas_tol: f64,
    starts: Vec<Point>,
    best_feasible: Vec<Option<(Point, f64)>>,
    best_any: Option<(Point, f64)>,
}

impl<'a> Slots<'a> {
    fn new(problem: &'a Problem, starts: &StartSet, feas_tol: f64) -> Self {
        let starts: Vec<Point> = starts.points().cloned().collect();
        let n = starts.len();
        Self {
            problem,
            feas_tol,
            starts,
            best_feasible: vec![None; n],
            best_any: None,
        }
    }

    fn observe(&mut self, slot: usize, x: &[f64], fitness: f64) {
        if self.best_any.as_ref().is_none_or(|(_, f)| fitness < *f) {
            self.best_any = Some((x.to_vec(), fitness));
        }
        if !self.problem.is_feasible(x, self.feas_tol) {
            return;
        }
        let Ok(cost) = self.problem.cost_at(x) else {
            return;
        };
        if self.best_feasible[slot].as_ref().is_none_or(|(_, c)| cost < *c) {
            self.best_feasible[slot] = Some((x.to_vec(), cost));
        }
    }

    fn report(self, method: Method, iterations: usize, finals: &[Point], t0: Instant) -> SolverReport {
        let per_start: Vec<StartOutcome> = self
            .starts
            .iter()
            .zip(&self.best_feasible)
            .zip(finals)
            .map(|((start, best), last)| StartOutcome {
                start: start.clone(),
                final_point: best.as_ref().map_or_else(|| last.clone(), |(x, _)| x.clone()),
                cost: best.as_ref().map(|(_, c)| *c),
                iterations,
                truncated: false,
                error: None,
                cost_history: Vec::new(),
            })
            .collect();
        let keys: Vec<(Option<f64>, usize)> = per_start.iter().map(|s| (s.cost, 0)).collect();
        let (best_point, best_cost, winner_index, best_infeasible) = match pick_winner(&keys, 0.0) {
            Some(w) => (
                per_start[w].final_point.clone(),
                per_start[w].cost.unwrap_or(f64::NAN),
                w,
                false,
            ),
            None => {
                let (x, fit) = self.best_any.unwrap_or_else(|| (self.starts[0].clone(), f64::NAN));
                let cost = self.problem.cost_at(&x).unwrap_or(fit);
                (x, cost, 0, true)
            }
        };
        SolverReport {
            method,
            best_point,
            best_cost,
            winner_index,
            winner_trace: None,
            per_start,
            best_infeasible,
            wall_time: t0.elapsed().as_secs_f64(),
        }
    }
}

fn tournament(rng: &mut ChaCha8Rng, fitness: &[f64], size: usize) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] < fitness[best] || (fitness[c] == fitness[best] && c < best) {
            best = c;
        }
    }
    best
}

/// Generational GA seeded with `starts` as the initial population.
///
/// Tournament selection, arithmetic crossover `c = a + alpha (b - a)`,
/// per-gene Gaussian mutation, box clipping. No elitism.
pub fn ga_solve(p: &Problem, starts: &StartSet, cfg: &MetaConfig) -> Result<SolverReport, String> {
    cfg.validate()?;
    if starts.is_empty() {
        return Err("no start points".into());
    }
    let t0 = Instant::now();
    let size = starts.len();
    let mut rng = rng::stream(cfg.seed, Purpose::Genetic, 0);
    let sigmas: Vec<Normal<f64>> = p
        .bounds()
        .iter()
        .map(|b| Normal::new(0.0, cfg.mutation_sigma * b.width()).expect("finite sigma"))
        .collect();

    let mut slots = Slots::new(p, starts, cfg.feas_tol);
    let mut pop: Vec<Point> = starts.points().cloned().collect();
    let mut fit: Vec<f64> = pop
        .iter()
        .map(|x| penalized_fitness(p, x, cfg.penalty_weight))
        .collect();
    for (k, x) in pop.iter().enumerate() {
        slots.observe(k, x, fit[k]);
    }

    for _ in 0..cfg.max_iterations {
        let mut next: Vec<Point> = Vec::with_capacity(size);
        while next.len() < size {
            let a = &pop[tournament(&mut rng, &fit, cfg.tournament_size)];
            let b = &pop[tournament(&mut rng, &fit, cfg.tournament_size)];
            let (mut c1, mut c2) = if rng.random::<f64>() < cfg.crossover_rate {
                let alpha: f64 = rng.random();
                (
                    a.iter().zip(b).map(|(u, v)| u + alpha * (v - u)).collect::<Point>(),
                    a.iter().zip(b).map(|(u, v)| v + alpha * (u - v)).collect::<Point>(),
                )
            } else {
                (a.clone(), b.clone())
            };
            for child in [&mut c1, &mut c2] {
                for (d, g) in child.iter_mut().enumerate() {
                    if rng.random::<f64>() < cfg.mutation_rate {
                        *g += sigmas[d].sample(&mut rng);
                    }
                }
                clip(p, child);
            }
            next.push(c1);
            if next.len() < size {
                next.push(c2);
            }
        }
        pop = next;
        for (k, x) in pop.iter().enumerate() {
            fit[k] = penalized_fitness(p, x, cfg.penalty_weight);
            slots.observe(k, x, fit[k]);
        }
    }
    Ok(slots.report(Method::Ga, cfg.max_iterations, &pop, t0))
}

/// Global-best PSO with zero initial velocities, seeded with `starts` as the
/// swarm. Personal and global bests use the penalized fitness.
pub fn pso_solve(p: &Problem, starts: &StartSet, cfg: &MetaConfig) -> Result<SolverReport, String> {
    cfg.validate()?;
    if starts.is_empty() {
        return Err("no start points".into());
    }
    let t0 = Instant::now();
    let n = p.n();
    let mut rng = rng::stream(cfg.seed, Purpose::Swarm, 0);
    let vmax: Vec<f64> = p.bounds().iter().map(|b| cfg.velocity_clamp * b.width()).collect();

    let mut slots = Slots::new(p, starts, cfg.feas_tol);
    let mut pos: Vec<Point> = starts.points().cloned().collect();
    let mut vel: Vec<Point> = vec![vec![0.0; n]; pos.len()];
    let mut pbest = pos.clone();
    let mut pbest_fit: Vec<f64> = pos
        .iter()
        .map(|x| penalized_fitness(p, x, cfg.penalty_weight))
        .collect();
    for (k, x) in pos.iter().enumerate() {
        slots.observe(k, x, pbest_fit[k]);
    }
    let argmin = |f: &[f64]| {
        f.iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
            .map_or(0, |(k, _)| k)
    };
    let mut g = argmin(&pbest_fit);
    let mut gbest = pbest[g].clone();

    for _ in 0..cfg.max_iterations {
        for k in 0..pos.len() {
            for d in 0..n {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = cfg.inertia * vel[k][d]
                    + cfg.cognitive * r1 * (pbest[k][d] - pos[k][d])
                    + cfg.social * r2 * (gbest[d] - pos[k][d]);
                vel[k][d] = v.clamp(-vmax[d], vmax[d]);
                pos[k][d] += vel[k][d];
            }
            clip(p, &mut pos[k]);
            let f = penalized_fitness(p, &pos[k], cfg.penalty_weight);
            slots.observe(k, &pos[k], f);
            if f < pbest_fit[k] {
                pbest_fit[k] = f;
                pbest[k] = pos[k].clone();
            }
        }
        g = argmin(&pbest_fit);
        gbest = pbest[g].clone();
    }
    Ok(slots.report(Method::Pso, cfg.max_iterations, &pos, t0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::fixtures::bench3;
    use crate::problem::Bound;
    use crate::sampling::{sample, Provenance, SamplerConfig, SamplerMethod};

    #[test]
    fn fitness_equals_cost_when_feasible() {
        let p = bench3();
        let x = [2.0, 3.0, 1.0];
        assert_eq!(penalized_fitness(&p, &x, 1e6), p.cost_at(&x).unwrap());
        let y = [2.0, 3.5, 1.0];
        assert!((penalized_fitness(&p, &y, 1e6) - (p.cost_at(&y).unwrap() + 0.25e6)).abs() < 1e-6);
    }

    #[test]
    fn identical_population_without_mutation_is_stationary() {
        let p = bench3();
        let x = vec![2.4, 2.3, 0.95];
        let starts = StartSet::from_points(vec![x.clone(); 6], Provenance::Grid);
        let cfg = MetaConfig {
            mutation_rate: 0.0,
            max_iterations: 20,
            ..MetaConfig::default()
        };
        let r = ga_solve(&p, &starts, &cfg).unwrap();
        assert_eq!(r.best_point, x);
        assert!(r.per_start.iter().all(|s| s.final_point == x));
    }

    #[test]
    fn smallest_population_runs() {
        let p = bench3();
        let starts = sample(&p, &SamplerConfig::new(2, SamplerMethod::Hybrid, 1)).unwrap();
        let r = ga_solve(&p, &starts, &MetaConfig::default()).unwrap();
        assert_eq!(r.per_start.len(), 2);
        assert!(!r.best_infeasible);
        assert!(p.is_feasible(&r.best_point, 1e-9));
    }

    #[test]
    fn lone_particle_stays_put() {
        let p = bench3();
        let x = vec![2.4, 2.3, 0.95];
        let starts = StartSet::from_points(vec![x.clone()], Provenance::Grid);
        let r = pso_solve(&p, &starts, &MetaConfig::default()).unwrap();
        assert_eq!(r.best_point, x);
        assert_eq!(r.best_cost, p.cost_at(&x).unwrap());
    }

    #[test]
    fn pso_solves_sphere() {
        let p = Problem::from_sources(
            vec![Bound::new(-5.0, 5.0), Bound::new(-5.0, 5.0)],
            "x1^2 + x2^2",
            &[] as &[&str],
        )
        .unwrap();
        let starts = sample(&p, &SamplerConfig::new(8, SamplerMethod::Lhs, 2)).unwrap();
        let r = pso_solve(&p, &starts, &MetaConfig::default()).unwrap();
        assert!(r.best_cost < 1e-4, "{}", r.best_cost);
    }

    #[test]
    fn seeded_runs_repeat() {
        let p = bench3();
        let starts = sample(&p, &SamplerConfig::new(8, SamplerMethod::Hybrid, 5)).unwrap();
        let cfg = MetaConfig {
            seed: 11,
            ..MetaConfig::default()
        };
        for solver in [ga_solve, pso_solve] {
            let a = solver(&p, &starts, &cfg).unwrap();
            let b = solver(&p, &starts, &cfg).unwrap();
            assert!(a.same_result(&b));
            assert!(p.is_feasible(&a.best_point, 1e-9) || a.best_infeasible);
        }
    }

    #[test]
    fn infeasible_outcome_is_flagged() {
        let p = Problem::from_sources(vec![Bound::new(0.0, 1.0)], "x1", &["x1 >= 2"]).unwrap();
        let starts = StartSet::from_points(vec![vec![0.5], vec![0.2]], Provenance::Grid);
        let cfg = MetaConfig {
            max_iterations: 5,
            ..MetaConfig::default()
        };
        assert!(ga_solve(&p, &starts, &cfg).unwrap().best_infeasible);
        assert!(pso_solve(&p, &starts, &cfg).unwrap().best_infeasible);
    }

    #[test]
    fn invalid_rates_rejected() {
        let p = bench3();
        let starts = StartSet::from_points(vec![vec![2.4, 2.3, 0.95]], Provenance::Grid);
        let cfg = MetaConfig {
            mutation_rate: 1.5,
            ..MetaConfig::default()
        };
        assert!(ga_solve(&p, &starts, &cfg).is_err());
    }
}
