//! JSON documents written by the subcommands. Every document carries a
//! `schema` name and `version` matching a file under `schemas/`.

use blockalt::control::Telemetry;
use blockalt::sampling::StartSet;
use blockalt::{Method, SolverReport};
use serde::Serialize;

pub const VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct ProblemSummary {
    pub n: usize,
    pub bounds: Vec<[f64; 2]>,
    pub cost: String,
    pub constraints: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct SolveDocument {
    pub schema: &'static str,
    pub version: u32,
    pub problem: ProblemSummary,
    pub sampler: blockalt::SamplerMethod,
    pub seed: u64,
    pub n_starts: usize,
    /// `ceil(iterations / n)` of the winning run (bai only).
    pub full_cycles: Option<usize>,
    pub report: SolverReport,
}

#[derive(Debug, Serialize)]
pub struct CompareRow {
    pub n: usize,
    pub method: Method,
    pub best_cost: f64,
    pub best_infeasible: bool,
    pub success: bool,
    pub wall_time: f64,
}

#[derive(Debug, Serialize)]
pub struct Series {
    pub bai: Vec<f64>,
    pub pso: Vec<f64>,
    pub ga: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct MinN {
    pub bai: Option<usize>,
    pub pso: Option<usize>,
    pub ga: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct CompareDocument {
    pub schema: &'static str,
    pub version: u32,
    pub problem: ProblemSummary,
    pub seed: u64,
    pub sampler: blockalt::SamplerMethod,
    pub reference_n: usize,
    pub reference_cost: f64,
    pub reference_point: Vec<f64>,
    pub success_tol: f64,
    pub ns: Vec<usize>,
    /// Best cost per method, one entry per `ns` value.
    pub cost: Series,
    /// Wall time in seconds per method, one entry per `ns` value.
    pub time: Series,
    /// Smallest swept `n` at which each method succeeded.
    pub min_n: MinN,
    pub rows: Vec<CompareRow>,
}

#[derive(Debug, Serialize)]
pub struct SampleDocument {
    pub schema: &'static str,
    pub version: u32,
    pub problem: ProblemSummary,
    #[serde(flatten)]
    pub set: StartSet,
}

#[derive(Debug, Serialize)]
pub struct TelemetryDocument {
    pub schema: &'static str,
    pub version: u32,
    #[serde(flatten)]
    pub telemetry: Telemetry,
}
