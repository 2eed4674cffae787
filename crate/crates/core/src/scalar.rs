//! One-dimensional subproblem: with every coordinate but `i` frozen, find the
//! feasible interval along `x_i` and minimize the cost over it.
//!
//! Both steps rely on per-coordinate convexity: each constraint's sublevel
//! set along a coordinate is an interval, and the restricted cost is convex
//! on it. When that assumption fails the result is a local 1-D minimum.

use serde::{Deserialize, Serialize};

use crate::problem::{Problem, DEFAULT_FEAS_TOL};

/// 1 / golden ratio.
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarConfig {
    /// Width at which constraint-endpoint bisection stops.
    pub interval_tol: f64,
    /// Bracket width at which golden-section search stops.
    pub golden_tol: f64,
    /// Constraint values up to this count as satisfied.
    pub feas_tol: f64,
}

impl Default for ScalarConfig {
    fn default() -> Self {
        Self {
            interval_tol: 1e-10,
            golden_tol: 1e-9,
            feas_tol: DEFAULT_FEAS_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarSolution {
    pub value: f64,
    pub cost: f64,
    pub interval: Interval,
    /// Cost evaluations spent.
    pub probes: usize,
    /// Every probe hit a domain error; `value` is the incoming coordinate.
    pub all_probes_failed: bool,
}

/// Slice of the feasible set along coordinate `i` through `x`.
///
/// The result always contains `x[i]`. Endpoints satisfy every constraint
/// with `g_j <= max(0, g_j(x))`, so a point within `feas_tol` of the boundary
/// never drifts further out. If no feasible neighbor exists within
/// `interval_tol`, the interval collapses to `[x[i], x[i]]` (pinned).
pub fn feasible_interval(p: &Problem, x: &[f64], i: usize, cfg: &ScalarConfig) -> Interval {
    let xi = x[i];
    let bound = p.bounds()[i];
    if !bound.contains(xi) {
        return Interval::point(xi);
    }
    let mut lo = bound.lo;
    let mut hi = bound.hi;
    let mut work = x.to_vec();

    for g in p.constraints() {
        if !g.references(i) {
            continue;
        }
        let mut g_at = |v: f64| {
            work[i] = v;
            g.eval(&work).unwrap_or(f64::INFINITY)
        };
        let g_xi = g_at(xi);
        if g_xi > cfg.feas_tol {
            return Interval::point(xi);
        }
        // Never admit points that violate g_j more than the incoming one.
        let thr = g_xi.max(0.0);
        if hi > xi && g_at(hi) > thr {
            hi = boundary_search(&mut g_at, xi, hi, thr, cfg.interval_tol);
        }
        if lo < xi && g_at(lo) > thr {
            lo = boundary_search(&mut g_at, xi, lo, thr, cfg.interval_tol);
        }
    }

    if hi - lo <= cfg.interval_tol {
        Interval::point(xi)
    } else {
        Interval { lo, hi }
    }
}

/// Last feasible point on the segment from `inside` (feasible) toward
/// `outside` (infeasible): expand geometrically from `inside`, then bisect.
fn boundary_search<G: FnMut(f64) -> f64>(
    g: &mut G,
    inside: f64,
    outside: f64,
    thr: f64,
    tol: f64,
) -> f64 {
    let span = (outside - inside).abs();
    let dir = (outside - inside).signum();
    let mut feasible = inside;
    let mut infeasible = outside;
    let mut step = (span * 1e-6).max(tol);
    loop {
        let t = inside + dir * step;
        if (t - outside) * dir >= 0.0 {
            break;
        }
        if g(t) > thr {
            infeasible = t;
            break;
        }
        feasible = t;
        step *= 2.0;
    }
    while (infeasible - feasible).abs() > tol {
        let mid = 0.5 * (feasible + infeasible);
        if mid == feasible || mid == infeasible {
            break;
        }
        if g(mid) > thr {
            infeasible = mid;
        } else {
            feasible = mid;
        }
    }
    feasible
}

/// Minimizes the cost along coordinate `i` over `iv` by golden-section search.
///
/// The returned value is the best of the final bracket midpoint, the two
/// interval endpoints and the incoming `x[i]`, so the cost never rises above
/// the incoming cost. Domain errors count as `+inf`.
pub fn minimize_1d(
    p: &Problem,
    x: &[f64],
    i: usize,
    iv: Interval,
    cfg: &ScalarConfig,
) -> ScalarSolution {
    let mut work = x.to_vec();
    let mut probes = 0usize;
    let mut f = |v: f64| {
        probes += 1;
        work[i] = v;
        p.cost_at(&work).unwrap_or(f64::INFINITY)
    };

    let xi = x[i];
    let f_xi = f(xi);
    if iv.is_degenerate() {
        return ScalarSolution {
            value: xi,
            cost: f_xi,
            interval: iv,
            probes,
            all_probes_failed: !f_xi.is_finite(),
        };
    }

    let (mut a, mut b) = (iv.lo, iv.hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > cfg.golden_tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }

    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    for v in [iv.lo, iv.hi] {
        let fv = f(v);
        if fv < best.1 {
            best = (v, fv);
        }
    }
    if iv.contains(xi) && f_xi < best.1 {
        best = (xi, f_xi);
    }
    let all_probes_failed = !best.1.is_finite();
    if all_probes_failed {
        best = (xi, f_xi);
    }
    ScalarSolution {
        value: best.0,
        cost: best.1,
        interval: iv,
        probes,
        all_probes_failed,
    }
}
