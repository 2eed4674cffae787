//! `blockalt` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 infeasible or ill-posed
//! input.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use blockalt::control::ControllerChoice;
use blockalt::{Method, SamplerMethod};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "blockalt", version, about = "Block-alternating constrained optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem file and write a report with the winning trace.
    Solve(SolveArgs),
    /// Sweep the start count and compare bai, pso and ga on shared starts.
    Compare(CompareArgs),
    /// Run the closed-loop thermal scenario and write telemetry.
    Control(ControlArgs),
    /// Draw a start set and write it with provenance.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Random seed for sampling and the metaheuristics.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "BLOCKALT_WORKERS", value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write zero for wall-clock fields so repeated runs are byte-identical.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Debug, Args)]
struct Tolerances {
    #[arg(long)]
    x_tol: Option<f64>,
    #[arg(long)]
    cost_tol: Option<f64>,
    /// Coordinate updates for bai, generations for ga and pso.
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    problem: PathBuf,
    #[arg(long, default_value = "bai")]
    method: Method,
    /// Number of start points.
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value = "hybrid")]
    sampler: SamplerMethod,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    tol: Tolerances,
}

#[derive(Debug, Args)]
struct CompareArgs {
    problem: PathBuf,
    /// Start counts to sweep, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64,128,256,512")]
    ns: Vec<usize>,
    /// Start count for the bai reference optimum.
    #[arg(long, default_value_t = 512)]
    reference_n: usize,
    /// A run succeeds when its cost is within this of the reference.
    #[arg(long, default_value_t = 1e-4)]
    success_tol: f64,
    #[arg(long, default_value = "hybrid")]
    sampler: SamplerMethod,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    tol: Tolerances,
}

#[derive(Debug, Args)]
struct ControlArgs {
    scenario: PathBuf,
    /// Overrides the scenario's controller.
    #[arg(long)]
    controller: Option<ControllerChoice>,
    /// Directory for `telemetry_<controller>.json` and `.csv`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, env = "BLOCKALT_WORKERS", value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Debug, Args)]
struct SampleArgs {
    problem: PathBuf,
    #[arg(long, default_value = "hybrid")]
    sampler: SamplerMethod,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Compare(a) => commands::compare(a),
        Command::Control(a) => commands::control(a),
        Command::Sample(a) => commands::sample(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
