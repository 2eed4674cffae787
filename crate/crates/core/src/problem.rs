//! Constrained problem instances: box bounds, a cost and inequality
//! constraints `g_j(x) <= 0`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expr, ParseError};

/// Default feasibility tolerance applied to bounds and constraints.
pub const DEFAULT_FEAS_TOL: f64 = 1e-9;

/// A decision vector.
pub type Point = Vec<f64>;

/// Something that maps a point to a real value: the cost or one constraint.
pub trait Objective: Send + Sync {
    fn eval(&self, x: &[f64]) -> Result<f64, EvalError>;

    /// Whether the value can depend on coordinate `i`. Conservative default.
    fn references(&self, _i: usize) -> bool {
        true
    }

    fn describe(&self) -> String {
        "<native>".to_string()
    }
}

impl Objective for Expr {
    fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        Expr::eval(self, x)
    }

    fn references(&self, i: usize) -> bool {
        Expr::references(self, i)
    }

    fn describe(&self) -> String {
        self.to_string()
    }
}

/// Wraps a closure as an [`Objective`].
pub struct FnObjective<F> {
    f: F,
    label: String,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync,
{
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self {
            f,
            label: label.into(),
        }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync,
{
    fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        (self.f)(x)
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("a problem needs at least one variable")]
    NoVariables,
    #[error("bound {index} is invalid: [{lo}, {hi}]")]
    InvalidBound { index: usize, lo: f64, hi: f64 },
    #[error("expected {expected} bounds, got {got}")]
    BoundCount { expected: usize, got: usize },
    #[error("cost: {0}")]
    Cost(ParseError),
    #[error("constraint {index}: {source}")]
    Constraint { index: usize, source: ParseError },
}

/// An instance of the constrained problem class: minimize the cost subject
/// to `g_j(x) <= 0` for every constraint and `lo_i <= x_i <= hi_i`.
#[derive(Clone)]
pub struct Problem {
    bounds: Vec<Bound>,
    cost: Arc<dyn Objective>,
    constraints: Vec<Arc<dyn Objective>>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("bounds", &self.bounds)
            .field("cost", &self.cost.describe())
            .field(
                "constraints",
                &self
                    .constraints
                    .iter()
                    .map(|c| c.describe())
                    .collect::<Vec<_>>(),
            )
            .finish()
    }
}

/// Result of a feasibility check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    /// Largest bound residual or constraint value; `+inf` on domain errors.
    pub worst_violation: f64,
    pub violated_bounds: Vec<usize>,
    pub violated_constraints: Vec<usize>,
}

impl Problem {
    pub fn new(
        bounds: Vec<Bound>,
        cost: Arc<dyn Objective>,
        constraints: Vec<Arc<dyn Objective>>,
    ) -> Result<Self, ProblemError> {
        if bounds.is_empty() {
            return Err(ProblemError::NoVariables);
        }
        for (index, b) in bounds.iter().enumerate() {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.lo <= b.hi) {
                return Err(ProblemError::InvalidBound {
                    index,
                    lo: b.lo,
                    hi: b.hi,
                });
            }
        }
        Ok(Self {
            bounds,
            cost,
            constraints,
        })
    }

    /// Builds a problem from expression sources. Constraints use the
    /// `E <= 0` / `E1 >= E2` forms accepted by [`Expr::parse_constraint`].
    pub fn from_sources<S: AsRef<str>>(
        bounds: Vec<Bound>,
        cost: &str,
        constraints: &[S],
    ) -> Result<Self, ProblemError> {
        let n = bounds.len();
        if n == 0 {
            return Err(ProblemError::NoVariables);
        }
        let cost = Expr::parse(cost, n).map_err(ProblemError::Cost)?;
        let constraints = constraints
            .iter()
            .enumerate()
            .map(|(index, src)| {
                Expr::parse_constraint(src.as_ref(), n)
                    .map(|e| Arc::new(e) as Arc<dyn Objective>)
                    .map_err(|source| ProblemError::Constraint { index, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(bounds, Arc::new(cost), constraints)
    }

    pub fn n(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    pub fn cost(&self) -> &dyn Objective {
        self.cost.as_ref()
    }

    pub fn constraints(&self) -> &[Arc<dyn Objective>] {
        &self.constraints
    }

    pub fn cost_at(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.cost.eval(x)
    }

    pub fn check_feasible(&self, x: &[f64], tol: f64) -> FeasibilityVerdict {
        let mut worst = f64::NEG_INFINITY;
        let mut violated_bounds = Vec::new();
        let mut violated_constraints = Vec::new();

        if x.len() != self.n() {
            return FeasibilityVerdict {
                feasible: false,
                worst_violation: f64::INFINITY,
                violated_bounds: (0..self.n()).collect(),
                violated_constraints: Vec::new(),
            };
        }
        for (i, (b, &v)) in self.bounds.iter().zip(x).enumerate() {
            let r = if v.is_finite() {
                (b.lo - v).max(v - b.hi)
            } else {
                f64::INFINITY
            };
            worst = worst.max(r);
            if r > tol {
                violated_bounds.push(i);
            }
        }
        for (j, g) in self.constraints.iter().enumerate() {
            let r = g.eval(x).unwrap_or(f64::INFINITY);
            worst = worst.max(r);
            if r > tol {
                violated_constraints.push(j);
            }
        }
        FeasibilityVerdict {
            feasible: violated_bounds.is_empty() && violated_constraints.is_empty(),
            worst_violation: worst,
            violated_bounds,
            violated_constraints,
        }
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.n()
            && self
                .bounds
                .iter()
                .zip(x)
                .all(|(b, &v)| v.is_finite() && v >= b.lo - tol && v <= b.hi + tol)
            && self
                .constraints
                .iter()
                .all(|g| matches!(g.eval(x), Ok(v) if v <= tol))
    }

    /// Sum of squared constraint violations (`max(0, g_j)^2`); domain errors
    /// count as infinite.
    pub fn squared_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|g| match g.eval(x) {
                Ok(v) => v.max(0.0).powi(2),
                Err(_) => f64::INFINITY,
            })
            .sum()
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn bench3() -> Problem {
        Problem::from_sources(
            vec![
                Bound::new(0.0, 3.0),
                Bound::new(2.0, 10.0),
                Bound::new(-1.0, 1.0),
            ],
            "(x1 - x2)^2 + (1/x2 + 2)^2 + 0.5*x3^2",
            &["x1 + x2 <= 5", "x1*x3 >= 2"],
        )
        .unwrap()
    }

    pub fn basin() -> Problem {
        Problem::from_sources(
            vec![Bound::new(0.0, 3.0), Bound::new(0.0, 3.0)],
            "-5*exp(-(x1 - 1.2)^2/0.08) + 0.02*(x1 - 1.2)^4 + 0.02*(x1 - 1.2)^2 + 10*(x2 - 1.2)^2 + 10",
            &["x1 >= 0.5", "x2*(x1 - 0.5) <= 1"],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bench3_feasibility() {
        let p = bench3();
        let v = p.check_feasible(&[2.0, 3.0, 1.0], 1e-9);
        assert!(v.feasible, "{v:?}");
        assert!(v.worst_violation <= 1e-9);

        let v = p.check_feasible(&[0.0, 2.0, 0.0], 1e-9);
        assert!(!v.feasible);
        assert_eq!(v.violated_constraints, vec![1]);
        assert!(v.violated_bounds.is_empty());
        assert_eq!(v.worst_violation, 2.0);
    }

    #[test]
    fn basin_boundary() {
        let p = basin();
        for x2 in [0.0, 1.5, 3.0] {
            assert!(p.check_feasible(&[0.5, x2], 0.0).feasible);
        }
        assert!(!p.check_feasible(&[0.49, 1.0], 0.0).feasible);
    }

    #[test]
    fn cost_values() {
        let p = bench3();
        assert!((p.cost_at(&[2.0, 3.0, 1.0]).unwrap() - 6.944_444_444_444_445).abs() < 1e-12);
        let c = Problem::from_sources(vec![Bound::new(-1.0, 1.0)], "5", &[] as &[&str]).unwrap();
        assert_eq!(c.cost_at(&[0.3]).unwrap(), 5.0);
        assert_eq!(basin().cost_at(&[1.2, 1.2]).unwrap(), 5.0);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            Problem::from_sources(vec![], "1", &[] as &[&str]).unwrap_err(),
            ProblemError::NoVariables
        );
        assert!(matches!(
            Problem::from_sources(vec![Bound::new(1.0, 0.0)], "x1", &[] as &[&str]),
            Err(ProblemError::InvalidBound { index: 0, .. })
        ));
        assert!(matches!(
            Problem::from_sources(vec![Bound::new(0.0, f64::INFINITY)], "x1", &[] as &[&str]),
            Err(ProblemError::InvalidBound { .. })
        ));
        assert!(matches!(
            Problem::from_sources(vec![Bound::new(0.0, 1.0)], "x1", &["x1 = 0.5"]),
            Err(ProblemError::Constraint {
                index: 0,
                source: ParseError::EqualityConstraint { .. }
            })
        ));
        assert!(matches!(
            Problem::from_sources(vec![Bound::new(0.0, 1.0)], "x2", &[] as &[&str]),
            Err(ProblemError::Cost(ParseError::VariableOutOfRange { .. }))
        ));
    }

    #[test]
    fn domain_error_is_infeasible() {
        let p = Problem::from_sources(vec![Bound::new(-1.0, 1.0)], "x1", &["log(x1) <= 0"]).unwrap();
        let v = p.check_feasible(&[-0.5], 1e-9);
        assert!(!v.feasible);
        assert_eq!(v.worst_violation, f64::INFINITY);
    }

    #[test]
    fn bound_violation_dominates() {
        let p = Problem::from_sources(vec![Bound::new(0.0, 1.0)], "x1", &["x1 - 10 <= 0"]).unwrap();
        let v = p.check_feasible(&[1.5], 1e-9);
        assert!(!v.feasible);
        assert_eq!(v.violated_bounds, vec![0]);
        assert!(v.violated_constraints.is_empty());
    }

    proptest! {
        #[test]
        fn feasibility_monotone_in_tol(x in prop::array::uniform3(-1.5f64..11.0), t in 0.0f64..1.0, dt in 0.0f64..1.0) {
            let p = bench3();
            if p.check_feasible(&x, t).feasible {
                prop_assert!(p.check_feasible(&x, t + dt).feasible);
            }
            prop_assert_eq!(p.check_feasible(&x, t).feasible, p.is_feasible(&x, t));
        }
    }
}
