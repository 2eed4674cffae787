use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use blockalt::baselines::{ga_solve, pso_solve, MetaConfig};
use blockalt::control::{run_closed_loop, ControllerKind};
use blockalt::io::{parse_scenario, FormatError, ProblemFile};
use blockalt::multistart::{self, MultistartError};
use blockalt::sampling::{sample as draw, SampleError, SamplerConfig, StartSet};
use blockalt::{Method, Problem, SamplerMethod, SolverConfig, SolverReport};
use serde::Serialize;

use crate::output::*;
use crate::{CompareArgs, ControlArgs, SampleArgs, SolveArgs, Tolerances};

#[derive(Debug)]
pub enum CliError {
    /// Bad input text or arguments: exit 1.
    Usage(String),
    /// Well-formed input with no feasible start or no usable result: exit 2.
    Infeasible(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Io(_) => 1,
            Self::Infeasible(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Infeasible(m) | Self::Io(m) => f.write_str(m),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<SampleError> for CliError {
    fn from(e: SampleError) -> Self {
        match e {
            SampleError::NoFeasibleStart => Self::Infeasible(e.to_string()),
            SampleError::Config(_) => Self::Usage(e.to_string()),
        }
    }
}

impl From<MultistartError> for CliError {
    fn from(e: MultistartError) -> Self {
        Self::Infeasible(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<(ProblemFile, Problem)> {
    let file = ProblemFile::parse(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let problem = file.build()?;
    Ok((file, problem))
}

fn summary(file: &ProblemFile) -> ProblemSummary {
    ProblemSummary {
        n: file.n(),
        bounds: file.bounds.iter().map(|b| [b.lo, b.hi]).collect(),
        cost: file.cost.clone(),
        constraints: file.constraints.clone(),
    }
}

fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn workers(requested: Option<u32>) -> usize {
    requested
        .map(|w| w as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn solver_config(t: &Tolerances) -> Result<SolverConfig> {
    let mut cfg = SolverConfig::default();
    if let Some(v) = t.x_tol {
        cfg.x_tol = v;
    }
    if let Some(v) = t.cost_tol {
        cfg.cost_tol = v;
    }
    if let Some(v) = t.max_iters {
        cfg.max_iterations = v;
    }
    if !(cfg.x_tol > 0.0 && cfg.cost_tol > 0.0) {
        return Err(CliError::Usage("--x-tol and --cost-tol must be positive".into()));
    }
    if cfg.max_iterations == 0 {
        return Err(CliError::Usage("--max-iters must be at least 1".into()));
    }
    Ok(cfg)
}

fn meta_config(t: &Tolerances, seed: u64) -> MetaConfig {
    MetaConfig {
        max_iterations: t.max_iters.unwrap_or(MetaConfig::default().max_iterations),
        seed,
        ..MetaConfig::default()
    }
}

fn run_method(
    method: Method,
    p: &Problem,
    starts: &StartSet,
    cfg: &SolverConfig,
    meta: &MetaConfig,
    workers: usize,
) -> Result<SolverReport> {
    if method == Method::Bai && cfg.max_iterations < p.n() {
        return Err(CliError::Usage(format!("--max-iters must be at least n = {}", p.n())));
    }
    match method {
        Method::Bai => Ok(multistart::run(p, starts, cfg, workers)?),
        Method::Ga => ga_solve(p, starts, meta).map_err(CliError::Infeasible),
        Method::Pso => pso_solve(p, starts, meta).map_err(CliError::Infeasible),
    }
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.10}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn solve(a: SolveArgs) -> Result<()> {
    let (file, p) = load_problem(&a.problem)?;
    let cfg = solver_config(&a.tol)?;
    let meta = meta_config(&a.tol, a.common.seed);
    let starts = draw(&p, &SamplerConfig::new(a.n as usize, a.sampler, a.common.seed))?;
    let mut report = run_method(a.method, &p, &starts, &cfg, &meta, workers(a.common.workers))?;
    if report.best_infeasible {
        eprintln!("warning: no feasible point found; reporting the least penalized one");
    }
    if a.common.omit_timing {
        report.wall_time = 0.0;
    }
    let full_cycles = (a.method == Method::Bai)
        .then(|| report.per_start[report.winner_index].iterations.div_ceil(p.n()));
    let doc = SolveDocument {
        schema: "solve-report",
        version: VERSION,
        problem: summary(&file),
        sampler: a.sampler,
        seed: a.common.seed,
        n_starts: starts.len(),
        full_cycles,
        report,
    };
    let line = format!(
        "best cost {:.12}\nbest point {}",
        doc.report.best_cost,
        fmt_point(&doc.report.best_point)
    );
    match &a.common.out {
        Some(_) => println!("{line}"),
        None => eprintln!("{line}"),
    }
    write_out(a.common.out.as_deref(), &to_json(&doc))
}

pub fn compare(a: CompareArgs) -> Result<()> {
    let (file, p) = load_problem(&a.problem)?;
    if a.ns.is_empty() || a.ns.contains(&0) || a.reference_n == 0 {
        return Err(CliError::Usage("start counts must be at least 1".into()));
    }
    if !(a.success_tol > 0.0) {
        return Err(CliError::Usage("--success-tol must be positive".into()));
    }
    let cfg = solver_config(&a.tol)?;
    let meta = meta_config(&a.tol, a.common.seed);
    let w = workers(a.common.workers);
    let seed = a.common.seed;

    let ref_starts = draw(&p, &SamplerConfig::new(a.reference_n, a.sampler, seed))?;
    let reference = run_method(Method::Bai, &p, &ref_starts, &cfg, &meta, w)?;

    let mut rows = Vec::new();
    let mut cost = Series { bai: vec![], pso: vec![], ga: vec![] };
    let mut time = Series { bai: vec![], pso: vec![], ga: vec![] };
    for &n in &a.ns {
        let starts = draw(&p, &SamplerConfig::new(n, a.sampler, seed))?;
        for method in [Method::Bai, Method::Pso, Method::Ga] {
            let r = run_method(method, &p, &starts, &cfg, &meta, w)?;
            let wall = if a.common.omit_timing { 0.0 } else { r.wall_time };
            let success = !r.best_infeasible && (r.best_cost - reference.best_cost).abs() <= a.success_tol;
            let (c, t) = match method {
                Method::Bai => (&mut cost.bai, &mut time.bai),
                Method::Pso => (&mut cost.pso, &mut time.pso),
                Method::Ga => (&mut cost.ga, &mut time.ga),
            };
            c.push(r.best_cost);
            t.push(wall);
            rows.push(CompareRow {
                n,
                method,
                best_cost: r.best_cost,
                best_infeasible: r.best_infeasible,
                success,
                wall_time: wall,
            });
        }
    }
    let first = |m: Method| rows.iter().find(|r| r.method == m && r.success).map(|r| r.n);
    let min_n = MinN {
        bai: first(Method::Bai),
        pso: first(Method::Pso),
        ga: first(Method::Ga),
    };
    eprintln!(
        "reference cost {:.12}; first success at n: bai {:?}, pso {:?}, ga {:?}",
        reference.best_cost, min_n.bai, min_n.pso, min_n.ga
    );
    let doc = CompareDocument {
        schema: "compare",
        version: VERSION,
        problem: summary(&file),
        seed,
        sampler: a.sampler,
        reference_n: a.reference_n,
        reference_cost: reference.best_cost,
        reference_point: reference.best_point,
        success_tol: a.success_tol,
        ns: a.ns,
        cost,
        time,
        min_n,
        rows,
    };
    write_out(a.common.out.as_deref(), &to_json(&doc))
}

pub fn control(a: ControlArgs) -> Result<()> {
    let mut sc = parse_scenario(&read(&a.scenario)?).map_err(|e| CliError::Usage(format!("{}: {e}", a.scenario.display())))?;
    if let Some(c) = a.controller {
        sc.controller = c;
    }
    if let Some(w) = a.workers {
        sc.workers = w as usize;
    }
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", a.out_dir.display())))?;
    for kind in sc.controller.kinds() {
        let mut t = run_closed_loop(&sc, kind).map_err(|e| CliError::Infeasible(e.to_string()))?;
        if a.omit_timing {
            t.strip_timing();
        }
        let stem = a.out_dir.join(format!("telemetry_{}", kind.name()));
        let json = stem.with_extension("json");
        let csv = stem.with_extension("csv");
        let flagged = t.flagged_ticks;
        let last = t.records.last().map(|r| r.y);
        let doc = TelemetryDocument {
            schema: "telemetry",
            version: VERSION,
            telemetry: t,
        };
        write_out(Some(&json), &to_json(&doc))?;
        write_out(Some(&csv), &doc.telemetry.to_csv())?;
        println!(
            "{}: {} ticks, {} flagged, final y {}, wrote {} and {}",
            kind.name(),
            doc.telemetry.records.len(),
            flagged,
            last.map_or("n/a".to_string(), |y| format!("{y:.3}")),
            json.display(),
            csv.display()
        );
        if kind == ControllerKind::Osap && flagged > 0 {
            eprintln!("warning: {flagged} osap ticks had no feasible solution and kept the previous input");
        }
    }
    Ok(())
}

pub fn sample(a: SampleArgs) -> Result<()> {
    let (file, p) = load_problem(&a.problem)?;
    let set = draw(&p, &SamplerConfig::new(a.n as usize, a.sampler, a.common.seed))?;
    if a.sampler == SamplerMethod::Grid && set.len() < a.n as usize {
        eprintln!("warning: only {} feasible grid nodes", set.len());
    }
    let doc = SampleDocument {
        schema: "start-set",
        version: VERSION,
        problem: summary(&file),
        set,
    };
    write_out(a.common.out.as_deref(), &to_json(&doc))
}
