use std::path::PathBuf;

use clap::Args;
use lbdp::benchmark::{run_benchmark, BenchmarkReport, Cell, GapLaw};
use lbdp::estimate::Method;
use lbdp::io::{benchmark_to_json, write_benchmark_csv};
use lbdp::Rates;

use crate::config::Config;
use crate::{auto_seed, CliError, FitArgs};

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Comma-separated birth rates; the grid is the product of all lists.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    mu: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    z0: Option<Vec<u64>>,
    /// Transitions per trajectory.
    #[arg(long, value_delimiter = ',')]
    n_transitions: Option<Vec<usize>>,
    /// Trajectories per panel.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, conflicts_with = "gap_uniform")]
    dt: Option<f64>,
    /// Uniform random gaps, as `lo,hi`.
    #[arg(long, value_delimiter = ',')]
    gap_uniform: Option<Vec<f64>>,
    /// Keep paths that go extinct (by default they are resampled).
    #[arg(long)]
    allow_extinct: bool,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated methods, or `all`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[command(flatten)]
    fit: FitArgs,
    /// Directory for `cell_NNN.json`, `benchmark.json` and `benchmark.csv`.
    #[arg(long)]
    out_dir: PathBuf,
}

fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::usage(format!("--{name} is required (flag or [benchmark] config)")))
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>, CliError> {
    if names.len() == 1 && names[0].eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    names
        .iter()
        .map(|s| s.parse::<Method>().map_err(|e| CliError::usage(e.to_string())))
        .collect()
}

pub fn run(a: BenchmarkArgs, cfg: &Config) -> Result<u8, CliError> {
    let b = &cfg.benchmark;
    let lambdas = required(a.lambda, b.lambda.clone(), "lambda")?;
    let mus = required(a.mu, b.mu.clone(), "mu")?;
    let z0s = required(a.z0, b.z0.clone(), "z0")?;
    let ns = required(a.n_transitions, b.n_transitions.clone(), "n-transitions")?;
    let ms = a.m.or(b.m.clone()).unwrap_or_else(|| vec![1]);
    let gaps = match (a.dt, a.gap_uniform, b.dt, b.gap_uniform) {
        (Some(dt), None, _, _) => GapLaw::Equal { dt },
        (None, Some(g), _, _) if g.len() == 2 => GapLaw::Uniform { lo: g[0], hi: g[1] },
        (None, None, Some(dt), None) => GapLaw::Equal { dt },
        (None, None, None, Some([lo, hi])) => GapLaw::Uniform { lo, hi },
        _ => return Err(CliError::usage("give exactly one of --dt or --gap-uniform lo,hi")),
    };
    let condition = if a.allow_extinct { false } else { b.condition_nonextinct.unwrap_or(true) };
    let replicates = a.replicates.or(b.replicates).unwrap_or(100);
    let seed_was_generated = a.seed.or(b.seed).is_none();
    let seed = a.seed.or(b.seed).unwrap_or_else(auto_seed);
    let method_names = a
        .methods
        .or(b.methods.clone())
        .unwrap_or_else(|| vec!["gw".into(), "spmle".into()]);
    let methods = parse_methods(&method_names)?;
    let opts = a.fit.resolve(cfg.fit, seed);

    let mut cells = Vec::new();
    for &l in &lambdas {
        for &mu in &mus {
            let rates = Rates::new(l, mu)?;
            for &z0 in &z0s {
                for &n in &ns {
                    for &m in &ms {
                        cells.push(Cell { rates, z0, n_transitions: n, m, gaps, condition_nonextinct: condition });
                    }
                }
            }
        }
    }

    std::fs::create_dir_all(&a.out_dir)?;
    if seed_was_generated {
        eprintln!("seed: {seed}");
    }
    let mut reports: Vec<BenchmarkReport> = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let rep = run_benchmark(cell, &methods, replicates, seed, &opts)?;
        for row in &rep.rows {
            if row.n_failed > 0 {
                eprintln!(
                    "cell {i}: {} failed on {} of {replicates} replicates (first: {})",
                    row.method,
                    row.n_failed,
                    row.failures.first().map(String::as_str).unwrap_or("")
                );
            }
        }
        if rep.n_sim_failed > 0 {
            eprintln!("cell {i}: {} replicates could not be simulated", rep.n_sim_failed);
        }
        std::fs::write(a.out_dir.join(format!("cell_{i:03}.json")), benchmark_to_json(&rep)? + "\n")?;
        reports.push(rep);
    }
    let all = serde_json::to_string_pretty(&reports).map_err(|e| CliError::usage(e.to_string()))?;
    std::fs::write(a.out_dir.join("benchmark.json"), all + "\n")?;
    let mut csv = Vec::new();
    write_benchmark_csv(&mut csv, &reports)?;
    std::fs::write(a.out_dir.join("benchmark.csv"), csv)?;
    Ok(0)
}
