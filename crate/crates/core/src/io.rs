//! Flat text formats for problems and control scenarios.
//!
//! Both are line oriented: `#` starts a comment, blank lines are ignored and
//! each remaining line is a keyword followed by its value. The full grammars
//! are in `docs/problem-format.md` and `docs/scenario-format.md`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::control::Scenario;
use crate::expr::{Expr, ParseError};
use crate::problem::{Bound, Problem, ProblemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    /// An expression failed to parse; `column` is 1-based within the line.
    #[error("line {line}, column {column}: {source}")]
    Expression {
        line: usize,
        column: usize,
        source: ParseError,
    },
    #[error("{0}")]
    Missing(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

fn line_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Line {
        line,
        message: message.into(),
    }
}

/// Significant lines as `(1-based number, text without comment, offset of
/// the text within the raw line)`.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str, usize)> {
    text.lines().enumerate().filter_map(|(k, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let trimmed = body.trim();
        if trimmed.is_empty() {
            None
        } else {
            let lead = body.len() - body.trim_start().len();
            Some((k + 1, trimmed, lead))
        }
    })
}

fn split_key(s: &str) -> (&str, &str) {
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], s[i..].trim_start()),
        None => (s, ""),
    }
}

/// A problem as written in a file, sources kept verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub bounds: Vec<Bound>,
    pub cost: String,
    pub constraints: Vec<String>,
}

impl ProblemFile {
    pub fn n(&self) -> usize {
        self.bounds.len()
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut n: Option<usize> = None;
        let mut bounds: Vec<Bound> = Vec::new();
        let mut pending_bounds = 0usize;
        let mut bounds_seen = false;
        let mut cost: Option<(usize, usize, String)> = None;
        let mut constraints: Vec<(usize, usize, String)> = Vec::new();

        for (line, s, lead) in lines(text) {
            if pending_bounds > 0 {
                let parts: Vec<&str> = s.split_whitespace().collect();
                let [lo, hi] = parts[..] else {
                    return Err(line_err(line, "expected a bound pair `lo hi`"));
                };
                let num = |t: &str| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| line_err(line, format!("`{t}` is not a finite number")))
                };
                let (lo, hi) = (num(lo)?, num(hi)?);
                if lo > hi {
                    return Err(line_err(line, format!("lower bound {lo} exceeds upper bound {hi}")));
                }
                bounds.push(Bound::new(lo, hi));
                pending_bounds -= 1;
                continue;
            }
            let (key, rest) = split_key(s);
            let rest_offset = lead + (s.len() - rest.len());
            match key {
                "n" => {
                    if n.is_some() {
                        return Err(line_err(line, "`n` given twice"));
                    }
                    let v = rest
                        .parse::<usize>()
                        .ok()
                        .filter(|&v| v >= 1)
                        .ok_or_else(|| line_err(line, "`n` must be a positive integer"))?;
                    n = Some(v);
                }
                "bounds" => {
                    let Some(n) = n else {
                        return Err(line_err(line, "`bounds` must come after `n`"));
                    };
                    if bounds_seen {
                        return Err(line_err(line, "`bounds` given twice"));
                    }
                    if !rest.is_empty() {
                        return Err(line_err(line, "`bounds` takes no value; list pairs on the next lines"));
                    }
                    bounds_seen = true;
                    pending_bounds = n;
                }
                "cost" => {
                    if cost.is_some() {
                        return Err(line_err(line, "`cost` given twice"));
                    }
                    if rest.is_empty() {
                        return Err(line_err(line, "`cost` needs an expression"));
                    }
                    cost = Some((line, rest_offset, rest.to_string()));
                }
                "constraint" => {
                    if rest.is_empty() {
                        return Err(line_err(line, "`constraint` needs an expression"));
                    }
                    constraints.push((line, rest_offset, rest.to_string()));
                }
                other => return Err(line_err(line, format!("unknown keyword `{other}`"))),
            }
        }

        let n = n.ok_or_else(|| FormatError::Missing("missing `n`".into()))?;
        if !bounds_seen {
            return Err(FormatError::Missing("missing `bounds`".into()));
        }
        if pending_bounds > 0 {
            return Err(FormatError::Missing(format!(
                "expected {n} bound pairs, found {}",
                bounds.len()
            )));
        }
        let (cline, coff, cost) = cost.ok_or_else(|| FormatError::Missing("missing `cost`".into()))?;
        let expr_err = |line: usize, off: usize, source: ParseError| FormatError::Expression {
            line,
            column: off + source.offset() + 1,
            source,
        };
        Expr::parse(&cost, n).map_err(|e| expr_err(cline, coff, e))?;
        for (line, off, src) in &constraints {
            Expr::parse_constraint(src, n).map_err(|e| expr_err(*line, *off, e))?;
        }
        Ok(Self {
            bounds,
            cost,
            constraints: constraints.into_iter().map(|(_, _, s)| s).collect(),
        })
    }

    pub fn build(&self) -> Result<Problem, FormatError> {
        Ok(Problem::from_sources(
            self.bounds.clone(),
            &self.cost,
            &self.constraints,
        )?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("n {}\nbounds\n", self.n());
        for b in &self.bounds {
            let _ = writeln!(out, "{:?} {:?}", b.lo, b.hi);
        }
        let _ = writeln!(out, "cost {}", self.cost);
        for c in &self.constraints {
            let _ = writeln!(out, "constraint {c}");
        }
        out
    }
}

/// Parses a problem file straight into a [`Problem`].
pub fn parse_problem(text: &str) -> Result<Problem, FormatError> {
    ProblemFile::parse(text)?.build()
}

/// Parses a scenario file. Keys left out keep their [`Scenario::default`]
/// values.
pub fn parse_scenario(text: &str) -> Result<Scenario, FormatError> {
    let mut sc = Scenario::default();
    let mut seen: Vec<&str> = Vec::new();
    for (line, s, _) in lines(text) {
        let (key, value) = split_key(s);
        if value.is_empty() {
            return Err(line_err(line, format!("`{key}` needs a value")));
        }
        if seen.contains(&key) {
            return Err(line_err(line, format!("`{key}` given twice")));
        }
        let num = || {
            value
                .parse::<f64>()
                .map_err(|_| line_err(line, format!("`{key}` expects a number, got `{value}`")))
        };
        let count = || {
            value
                .parse::<usize>()
                .map_err(|_| line_err(line, format!("`{key}` expects a non-negative integer, got `{value}`")))
        };
        match key {
            "controller" => sc.controller = value.parse().map_err(|e: String| line_err(line, e))?,
            "duration" => sc.duration = num()?,
            "t_amb" => sc.t_amb = num()?,
            "reference" => sc.reference = num()?,
            "seed" => {
                sc.seed = value
                    .parse::<u64>()
                    .map_err(|_| line_err(line, format!("`seed` expects an unsigned integer, got `{value}`")))?
            }
            "noise" => sc.noise = num()?,
            "theta" => sc.theta = num()?,
            "norm" => sc.norm = value.parse().map_err(|e: String| line_err(line, e))?,
            "starts" => sc.starts = count()?,
            "workers" => sc.workers = count()?,
            other => return Err(line_err(line, format!("unknown keyword `{other}`"))),
        }
        seen.push(key);
    }
    sc.validate()
        .map_err(|e| FormatError::Missing(e.to_string()))?;
    Ok(sc)
}

pub fn scenario_to_text(sc: &Scenario) -> String {
    let controller = match sc.controller {
        crate::control::ControllerChoice::Osap => "osap",
        crate::control::ControllerChoice::Lqr => "lqr",
        crate::control::ControllerChoice::Both => "both",
    };
    let norm = match sc.norm {
        crate::control::LyapunovNorm::Root => "root",
        crate::control::LyapunovNorm::Squared => "squared",
    };
    format!(
        "controller {controller}\nduration {:?}\nt_amb {:?}\nreference {:?}\nseed {}\nnoise {:?}\ntheta {:?}\nnorm {norm}\nstarts {}\nworkers {}\n",
        sc.duration, sc.t_amb, sc.reference, sc.seed, sc.noise, sc.theta, sc.starts, sc.workers
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControllerChoice, LyapunovNorm};

    const BENCH3: &str = "\
# three variables
n 3
bounds
0 3
2 10
-1 1
cost (x1 - x2)^2 + (1/x2 + 2)^2 + 0.5*x3^2
constraint x1 + x2 <= 5
constraint x1*x3 >= 2   # product form
";

    #[test]
    fn reads_bench3() {
        let f = ProblemFile::parse(BENCH3).unwrap();
        assert_eq!(f.n(), 3);
        assert_eq!(f.constraints.len(), 2);
        let p = f.build().unwrap();
        assert!((p.cost_at(&[2.0, 3.0, 1.0]).unwrap() - 6.944_444_444_444_445).abs() < 1e-12);
        assert!(p.is_feasible(&[2.0, 3.0, 1.0], 1e-9));
        assert!(!p.is_feasible(&[0.0, 2.0, 0.0], 1e-9));
    }

    #[test]
    fn round_trips() {
        let f = ProblemFile::parse(BENCH3).unwrap();
        assert_eq!(ProblemFile::parse(&f.to_text()).unwrap(), f);
    }

    #[test]
    fn reports_positions() {
        let bad = BENCH3.replace("x1 + x2 <= 5", "x1 + * x2 <= 5");
        match ProblemFile::parse(&bad) {
            Err(FormatError::Expression { line, column, .. }) => {
                assert_eq!(line, 8);
                assert_eq!(column, "constraint x1 + ".len() + 1);
            }
            other => panic!("{other:?}"),
        }
        let bad = BENCH3.replace("2 10", "2 ten");
        assert!(matches!(ProblemFile::parse(&bad), Err(FormatError::Line { line: 5, .. })));
        let bad = BENCH3.replace("x1 + x2 <= 5", "x1 + x2 = 5");
        assert!(matches!(
            ProblemFile::parse(&bad),
            Err(FormatError::Expression {
                source: ParseError::EqualityConstraint { .. },
                ..
            })
        ));
        assert!(matches!(ProblemFile::parse("n 1\nbounds\n0 1\n"), Err(FormatError::Missing(_))));
        assert!(ProblemFile::parse("n 2\nbounds\n0 1\ncost x1\n").is_err());
        assert!(ProblemFile::parse("n 1\nbounds\n1 0\ncost x1\n").is_err());
        assert!(ProblemFile::parse("n 1\nbounds\n0 1\ncost x2\n").is_err());
    }

    #[test]
    fn scenario_defaults_and_overrides() {
        let sc = parse_scenario("# defaults\n").unwrap();
        assert_eq!(sc, Scenario::default());
        let sc = parse_scenario("controller lqr\nduration 0\nnorm squared\nseed 9\n").unwrap();
        assert_eq!(sc.controller, ControllerChoice::Lqr);
        assert_eq!(sc.duration, 0.0);
        assert_eq!(sc.norm, LyapunovNorm::Squared);
        assert_eq!(sc.seed, 9);
        assert_eq!(parse_scenario(&scenario_to_text(&sc)).unwrap(), sc);
    }

    #[test]
    fn scenario_errors() {
        assert!(parse_scenario("controller mpc\n").is_err());
        assert!(parse_scenario("duration -1\n").is_err());
        assert!(parse_scenario("speed 3\n").is_err());
        assert!(parse_scenario("seed 1\nseed 2\n").is_err());
        assert!(parse_scenario("theta\n").is_err());
    }
}
