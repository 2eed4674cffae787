//! Feasible start points: grid, Latin hypercube, Monte Carlo and the hybrid
//! mix of low-cost grid candidates with Latin hypercube samples.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{Bound, Point, Problem, DEFAULT_FEAS_TOL};
use crate::rng::{self, Purpose};

/// Grids with more nodes than this are not enumerated.
const GRID_ENUMERATION_LIMIT: u128 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    Hybrid,
    Grid,
    Lhs,
    MonteCarlo,
}

impl std::str::FromStr for SamplerMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hybrid" => Ok(Self::Hybrid),
            "grid" => Ok(Self::Grid),
            "lhs" => Ok(Self::Lhs),
            "monte_carlo" | "monte-carlo" | "mc" => Ok(Self::MonteCarlo),
            other => Err(format!("unknown sampler `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Grid,
    Lhs,
    MonteCarlo,
    /// Given by the caller, e.g. a warm start.
    Supplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_points: usize,
    pub method: SamplerMethod,
    pub seed: u64,
    /// Upper bound on grid nodes; sets the per-dimension resolution.
    pub grid_candidate_cap: usize,
    /// Random draws allowed per required point before falling back to the grid.
    pub rejection_cap: usize,
    pub feas_tol: f64,
}

impl SamplerConfig {
    pub fn new(n_points: usize, method: SamplerMethod, seed: u64) -> Self {
        Self {
            n_points,
            method,
            seed,
            grid_candidate_cap: 100_000,
            rejection_cap: 100,
            feas_tol: DEFAULT_FEAS_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("invalid sampler configuration: {0}")]
    Config(&'static str),
    #[error("no feasible start found")]
    NoFeasibleStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartPoint {
    pub point: Point,
    pub provenance: Provenance,
    /// Random sampling hit its rejection cap; this is the nearest feasible
    /// grid node instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSet {
    pub method: SamplerMethod,
    pub seed: u64,
    pub starts: Vec<StartPoint>,
    /// Grid picks the hybrid sampler wanted but could not find, replaced by
    /// extra Latin hypercube points.
    pub grid_shortfall: usize,
}

impl StartSet {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.starts.iter().map(|s| &s.point)
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.starts
            .iter()
            .filter(|s| s.provenance == provenance)
            .count()
    }

    /// Wraps explicit points (for example a user-supplied start).
    pub fn from_points(points: Vec<Point>, provenance: Provenance) -> Self {
        Self {
            method: SamplerMethod::Grid,
            seed: 0,
            starts: points
                .into_iter()
                .map(|point| StartPoint {
                    point,
                    provenance,
                    fallback: false,
                })
                .collect(),
            grid_shortfall: 0,
        }
    }
}

/// `round(n / 2)` with ties to even.
pub fn grid_share(n: usize) -> usize {
    (n as f64 / 2.0).round_ties_even() as usize
}

/// Largest `m >= 3` per dimension with `m^n <= cap`, or 3 when even that
/// exceeds the cap.
pub fn grid_resolution(n: usize, cap: usize) -> usize {
    let fits = |m: usize| (m as u128).checked_pow(n as u32).is_some_and(|v| v <= cap as u128);
    let mut m = (cap as f64).powf(1.0 / n as f64).floor().max(1.0) as usize;
    while m > 1 && !fits(m) {
        m -= 1;
    }
    while fits(m + 1) {
        m += 1;
    }
    m.max(3)
}

/// Feasible nodes of the uniform grid over the box, with their costs, in
/// lexicographic node order. Nodes where the cost is undefined are dropped.
pub fn grid_candidates(p: &Problem, cap: usize, tol: f64) -> Vec<(Point, f64)> {
    let n = p.n();
    let m = grid_resolution(n, cap);
    if (m as u128).checked_pow(n as u32).is_none_or(|v| v > GRID_ENUMERATION_LIMIT) {
        return Vec::new();
    }
    let axes: Vec<Vec<f64>> = p
        .bounds()
        .iter()
        .map(|b| {
            (0..m)
                .map(|k| {
                    if k == m - 1 {
                        b.hi
                    } else {
                        b.lo + b.width() * k as f64 / (m - 1) as f64
                    }
                })
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    let mut x: Point = axes.iter().map(|a| a[0]).collect();
    loop {
        if p.is_feasible(&x, tol) {
            if let Ok(c) = p.cost_at(&x) {
                out.push((x.clone(), c));
            }
        }
        // Odometer increment, last coordinate fastest.
        let mut d = n;
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < m {
                x[d] = axes[d][idx[d]];
                break;
            }
            idx[d] = 0;
            x[d] = axes[d][0];
        }
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Grid candidates sorted by ascending cost, ties by lexicographic order.
pub fn ranked_grid(p: &Problem, cap: usize, tol: f64) -> Vec<(Point, f64)> {
    let mut cands = grid_candidates(p, cap, tol);
    cands.sort_by(|(xa, ca), (xb, cb)| ca.total_cmp(cb).then_with(|| lexicographic(xa, xb)));
    cands
}

/// One raw Latin hypercube design of `count` points over the box.
///
/// Per dimension: shuffle `0..count` into a stratum permutation, then draw
/// one uniform offset per point inside its stratum.
pub fn lhs_design<R: Rng>(bounds: &[Bound], count: usize, rng: &mut R) -> Vec<Point> {
    let mut pts = vec![vec![0.0; bounds.len()]; count];
    for (d, b) in bounds.iter().enumerate() {
        let mut perm: Vec<usize> = (0..count).collect();
        perm.shuffle(rng);
        for (j, stratum) in perm.into_iter().enumerate() {
            let u: f64 = rng.random();
            let frac = (stratum as f64 + u) / count as f64;
            pts[j][d] = (b.lo + frac * b.width()).min(b.hi);
        }
    }
    pts
}

/// Raw (pre-rejection) design number `attempt` as used by [`lhs`].
pub fn lhs_draw(p: &Problem, count: usize, seed: u64, attempt: u32) -> Vec<Point> {
    let mut rng = rng::stream(seed, Purpose::Lhs, attempt);
    lhs_design(p.bounds(), count, &mut rng)
}

fn nearest<'a>(bounds: &[Bound], anchor: &[f64], cands: &'a [(Point, f64)]) -> Option<&'a Point> {
    let dist = |x: &[f64]| -> f64 {
        bounds
            .iter()
            .zip(x.iter().zip(anchor))
            .map(|(b, (a, c))| {
                let w = if b.width() > 0.0 { b.width() } else { 1.0 };
                ((a - c) / w).powi(2)
            })
            .sum()
    };
    cands
        .iter()
        .map(|(x, _)| (dist(x), x))
        .min_by(|(da, xa), (db, xb)| da.total_cmp(db).then_with(|| lexicographic(xa, xb)))
        .map(|(_, x)| x)
}

/// `count` feasible Latin hypercube points.
///
/// Whole designs are redrawn (fresh permutations) and their feasible points
/// kept in order until `count` are collected, for at most
/// `rejection_cap * count` designs. Remaining slots take the feasible grid
/// node nearest to the slot's sample in the last design.
pub fn lhs(p: &Problem, count: usize, cfg: &SamplerConfig) -> Result<Vec<StartPoint>, SampleError> {
    random_fill(p, count, cfg, Provenance::Lhs)
}

/// `count` feasible uniform samples. Point `i` draws from its own stream and
/// gets `rejection_cap` attempts before the grid fallback.
pub fn monte_carlo(
    p: &Problem,
    count: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<StartPoint>, SampleError> {
    random_fill(p, count, cfg, Provenance::MonteCarlo)
}

fn random_fill(
    p: &Problem,
    count: usize,
    cfg: &SamplerConfig,
    kind: Provenance,
) -> Result<Vec<StartPoint>, SampleError> {
    if cfg.rejection_cap == 0 {
        return Err(SampleError::Config("rejection_cap must be at least 1"));
    }
    let mut out: Vec<StartPoint> = Vec::with_capacity(count);
    let mut anchors: Vec<Point> = Vec::new();

    match kind {
        Provenance::Lhs => {
            let budget = cfg.rejection_cap.saturating_mul(count).min(u32::MAX as usize);
            let mut last = Vec::new();
            for attempt in 0..budget {
                if out.len() == count {
                    break;
                }
                let design = lhs_draw(p, count, cfg.seed, attempt as u32);
                for x in &design {
                    if out.len() == count {
                        break;
                    }
                    if p.is_feasible(x, cfg.feas_tol) {
                        out.push(StartPoint {
                            point: x.clone(),
                            provenance: kind,
                            fallback: false,
                        });
                    }
                }
                last = design;
            }
            anchors.extend(last.into_iter().skip(out.len()));
        }
        _ => {
            for i in 0..count {
                let mut rng = rng::stream(cfg.seed, Purpose::MonteCarlo, i as u32);
                let mut found = None;
                let mut anchor = Vec::new();
                for _ in 0..cfg.rejection_cap {
                    let x: Point = p
                        .bounds()
                        .iter()
                        .map(|b| (b.lo + rng.random::<f64>() * b.width()).min(b.hi))
                        .collect();
                    if p.is_feasible(&x, cfg.feas_tol) {
                        found = Some(x);
                        break;
                    }
                    anchor = x;
                }
                match found {
                    Some(point) => out.push(StartPoint {
                        point,
                        provenance: kind,
                        fallback: false,
                    }),
                    None => anchors.push(anchor),
                }
            }
        }
    }

    if !anchors.is_empty() {
        let grid = grid_candidates(p, cfg.grid_candidate_cap, cfg.feas_tol);
        for anchor in anchors {
            let point = nearest(p.bounds(), &anchor, &grid)
                .ok_or(SampleError::NoFeasibleStart)?
                .clone();
            out.push(StartPoint {
                point,
                provenance: kind,
                fallback: true,
            });
        }
    }
    Ok(out)
}

/// `round(N/2)` lowest-cost grid nodes plus `N - round(N/2)` Latin hypercube
/// points. A grid shortfall is made up with extra Latin hypercube points.
pub fn hybrid(p: &Problem, cfg: &SamplerConfig) -> Result<StartSet, SampleError> {
    let n = cfg.n_points;
    let want_grid = grid_share(n);
    let grid_picks: Vec<StartPoint> = if want_grid > 0 {
        ranked_grid(p, cfg.grid_candidate_cap, cfg.feas_tol)
            .into_iter()
            .take(want_grid)
            .map(|(point, _)| StartPoint {
                point,
                provenance: Provenance::Grid,
                fallback: false,
            })
            .collect()
    } else {
        Vec::new()
    };
    let shortfall = want_grid - grid_picks.len();
    let lhs_points = lhs(p, n - want_grid + shortfall, cfg)?;
    let mut starts = grid_picks;
    starts.extend(lhs_points);
    Ok(StartSet {
        method: SamplerMethod::Hybrid,
        seed: cfg.seed,
        starts,
        grid_shortfall: shortfall,
    })
}

/// Dispatches on `cfg.method`. The pure grid sampler returns the `N`
/// lowest-cost feasible nodes.
pub fn sample(p: &Problem, cfg: &SamplerConfig) -> Result<StartSet, SampleError> {
    if cfg.n_points == 0 {
        return Err(SampleError::Config("n_points must be at least 1"));
    }
    if cfg.grid_candidate_cap == 0 {
        return Err(SampleError::Config("grid_candidate_cap must be at least 1"));
    }
    let starts = match cfg.method {
        SamplerMethod::Hybrid => return hybrid(p, cfg),
        SamplerMethod::Grid => {
            let picks: Vec<StartPoint> = ranked_grid(p, cfg.grid_candidate_cap, cfg.feas_tol)
                .into_iter()
                .take(cfg.n_points)
                .map(|(point, _)| StartPoint {
                    point,
                    provenance: Provenance::Grid,
                    fallback: false,
                })
                .collect();
            if picks.is_empty() {
                return Err(SampleError::NoFeasibleStart);
            }
            picks
        }
        SamplerMethod::Lhs => lhs(p, cfg.n_points, cfg)?,
        SamplerMethod::MonteCarlo => monte_carlo(p, cfg.n_points, cfg)?,
    };
    Ok(StartSet {
        method: cfg.method,
        seed: cfg.seed,
        starts,
        grid_shortfall: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::fixtures::{bench3, basin};

    fn unit_box(n: usize) -> Problem {
        Problem::from_sources(vec![Bound::new(0.0, 1.0); n], "x1", &[] as &[&str]).unwrap()
    }

    #[test]
    fn rounding_half_even() {
        assert_eq!(
            [1, 2, 3, 4, 5, 6, 7, 32].map(grid_share),
            [0, 1, 2, 2, 2, 3, 4, 16]
        );
    }

    #[test]
    fn resolution() {
        assert_eq!(grid_resolution(2, 10_000), 100);
        assert_eq!(grid_resolution(3, 100_000), 46);
        assert_eq!(grid_resolution(1, 3), 3);
        assert_eq!(grid_resolution(1, 1), 3);
        assert_eq!(grid_resolution(12, 100_000), 3);
        assert_eq!(grid_resolution(3, 27), 3);
        assert_eq!(grid_resolution(3, 64), 4);
    }

    #[test]
    fn one_dimensional_grid_includes_endpoints() {
        let c = grid_candidates(&unit_box(1), 3, 1e-9);
        let pts: Vec<f64> = c.iter().map(|(x, _)| x[0]).collect();
        assert_eq!(pts, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn basin_grid_respects_constraints() {
        let p = basin();
        let c = grid_candidates(&p, 10_000, 1e-9);
        assert!(!c.is_empty() && c.len() < 10_000);
        for (x, _) in &c {
            assert!(x[0] >= 0.5);
            if x[0] > 0.5 {
                assert!(x[1] <= 1.0 / (x[0] - 0.5) + 1e-9);
            }
        }
    }

    #[test]
    fn bench3_grid_discards_small_x1() {
        for (x, _) in grid_candidates(&bench3(), 100_000, 1e-9) {
            assert!(x[0] >= 2.0 - 1e-12);
        }
    }

    #[test]
    fn lhs_strata_on_unit_square() {
        let p = unit_box(2);
        let design = lhs_draw(&p, 4, 11, 0);
        for d in 0..2 {
            let mut strata: Vec<usize> = design
                .iter()
                .map(|x| ((x[d] * 4.0).floor() as usize).min(3))
                .collect();
            strata.sort();
            assert_eq!(strata, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn single_lhs_point_is_in_box() {
        let p = unit_box(3);
        let cfg = SamplerConfig::new(1, SamplerMethod::Lhs, 5);
        let s = sample(&p, &cfg).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.starts[0].point.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn lhs_is_deterministic() {
        let p = basin();
        let cfg = SamplerConfig::new(2, SamplerMethod::Lhs, 42);
        assert_eq!(sample(&p, &cfg).unwrap(), sample(&p, &cfg).unwrap());
    }

    #[test]
    fn hybrid_split_counts() {
        let p = basin();
        for (n, g) in [(1, 0), (4, 2), (5, 2), (32, 16)] {
            let s = sample(&p, &SamplerConfig::new(n, SamplerMethod::Hybrid, 3)).unwrap();
            assert_eq!(s.len(), n);
            assert_eq!(s.count(Provenance::Grid), g);
            assert_eq!(s.count(Provenance::Lhs), n - g);
            assert_eq!(s.grid_shortfall, 0);
            for x in s.points() {
                assert!(p.is_feasible(x, 1e-9));
            }
        }
    }

    #[test]
    fn hybrid_grid_points_near_basin() {
        let s = sample(&basin(), &SamplerConfig::new(4, SamplerMethod::Hybrid, 3)).unwrap();
        for st in s.starts.iter().filter(|s| s.provenance == Provenance::Grid) {
            assert!((st.point[0] - 1.2).abs() < 0.1 && (st.point[1] - 1.2).abs() < 0.1);
        }
    }

    #[test]
    fn hybrid_backfills_grid_shortfall() {
        // Only x1 = 1 on the 3-node grid is feasible.
        let p = Problem::from_sources(vec![Bound::new(0.0, 1.0)], "x1", &["x1 >= 0.9"]).unwrap();
        let mut cfg = SamplerConfig::new(6, SamplerMethod::Hybrid, 1);
        cfg.grid_candidate_cap = 3;
        let s = sample(&p, &cfg).unwrap();
        assert_eq!(s.count(Provenance::Grid), 1);
        assert_eq!(s.grid_shortfall, 2);
        assert_eq!(s.count(Provenance::Lhs), 5);
    }

    #[test]
    fn monte_carlo_unconstrained_and_bench3() {
        let s = sample(&unit_box(2), &SamplerConfig::new(10, SamplerMethod::MonteCarlo, 9)).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.starts.iter().all(|s| !s.fallback));

        let p = bench3();
        let s = sample(&p, &SamplerConfig::new(8, SamplerMethod::MonteCarlo, 9)).unwrap();
        for x in s.points() {
            assert!(x[0] >= 2.0 - 1e-9);
            assert!(p.is_feasible(x, 1e-9));
        }
        let again = sample(&p, &SamplerConfig::new(8, SamplerMethod::MonteCarlo, 9)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn empty_feasible_set_errors() {
        let p = Problem::from_sources(vec![Bound::new(0.0, 1.0)], "x1", &["x1 >= 2"]).unwrap();
        for method in [SamplerMethod::Hybrid, SamplerMethod::Grid, SamplerMethod::Lhs, SamplerMethod::MonteCarlo] {
            assert_eq!(
                sample(&p, &SamplerConfig::new(4, method, 0)).unwrap_err(),
                SampleError::NoFeasibleStart
            );
        }
        assert!(matches!(
            sample(&p, &SamplerConfig::new(0, SamplerMethod::Lhs, 0)),
            Err(SampleError::Config(_))
        ));
    }

    #[test]
    fn grid_selection_is_cost_optimal() {
        let p = bench3();
        let ranked = ranked_grid(&p, 100_000, 1e-9);
        let s = sample(&p, &SamplerConfig::new(32, SamplerMethod::Hybrid, 0)).unwrap();
        let worst_selected = s
            .starts
            .iter()
            .filter(|s| s.provenance == Provenance::Grid)
            .map(|s| p.cost_at(&s.point).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        for (_, c) in &ranked[16..] {
            assert!(*c >= worst_selected);
        }
    }
}
