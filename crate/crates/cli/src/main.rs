//! `lbdp`: simulate, fit and benchmark linear birth-and-death processes.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 resource cap,
//! 4 non-convergence.

mod benchmark;
mod config;
mod estimate;
mod pmf;
mod simulate;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lbdp::estimate::FitOptions;
use lbdp::quasi::CumulantMode;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CAP: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

pub fn exit_code(e: &lbdp::Error) -> u8 {
    use lbdp::Error::*;
    match e {
        Domain(_) | Precondition(_) | Parse { .. } | Io(_) => EXIT_USAGE,
        ResourceCap(_) => EXIT_CAP,
        Solver(_) | Degenerate(_) => EXIT_NOT_CONVERGED,
    }
}

impl From<lbdp::Error> for CliError {
    fn from(e: lbdp::Error) -> Self {
        Self { code: exit_code(&e), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("i/o error: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "lbdp", version, about = "Rate estimation for linear birth-and-death processes")]
struct Cli {
    /// TOML file with [fit] and [benchmark] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate trajectories and write a panel CSV.
    Simulate(simulate::SimulateArgs),
    /// Fit one or all estimators to a panel CSV.
    Estimate(estimate::EstimateArgs),
    /// Tabulate the exact transition pmf and its saddlepoint approximations.
    Pmf(pmf::PmfArgs),
    /// Monte-Carlo comparison of estimators over a grid of settings.
    Benchmark(benchmark::BenchmarkArgs),
}

/// Optimiser flags shared by `estimate` and `benchmark`.
#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iters: Option<u64>,
    /// Largest count the exact likelihood will accept.
    #[arg(long)]
    mle_count_cap: Option<u64>,
    /// Increment cumulants used by the qg sandwich: gaussian or lbdp.
    #[arg(long, value_parser = parse_cumulants)]
    qg_cumulants: Option<CumulantMode>,
}

fn parse_cumulants(s: &str) -> Result<CumulantMode, String> {
    match s {
        "gaussian" => Ok(CumulantMode::Gaussian),
        "lbdp" => Ok(CumulantMode::Lbdp),
        _ => Err(format!("expected gaussian or lbdp, got '{s}'")),
    }
}

impl FitArgs {
    pub fn resolve(&self, base: Option<FitOptions>, seed: u64) -> FitOptions {
        let mut o = base.unwrap_or_default();
        if let Some(v) = self.tol {
            o.tol = v;
        }
        if let Some(v) = self.restarts {
            o.restarts = v;
        }
        if let Some(v) = self.max_iters {
            o.max_iters = v;
        }
        if let Some(v) = self.mle_count_cap {
            o.mle_count_cap = v;
        }
        if let Some(v) = self.qg_cumulants {
            o.qg_cumulants = v;
        }
        o.seed = seed;
        o
    }
}

/// Seed from the clock, used when `--seed` is absent.
pub fn auto_seed() -> u64 {
    let d = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default();
    d.as_secs().wrapping_mul(1_000_000_007) ^ u64::from(d.subsec_nanos())
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("LBDP_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::usage(format!("LBDP_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, CliError> {
    configure_threads()?;
    let cfg = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Estimate(a) => estimate::run(a, &cfg),
        Command::Pmf(a) => pmf::run(a),
        Command::Benchmark(a) => benchmark::run(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
