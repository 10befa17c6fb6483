use std::path::PathBuf;

use clap::Args;
use lbdp::io::{write_panel, ARTIFACT_VERSION};
use lbdp::simulate::{replicate_rng, simulate_with, SimConfig};
use lbdp::{Panel, Rates};
use serde::Serialize;

use crate::{auto_seed, emit, CliError};

pub const META_SCHEMA: &str = "lbdp.simulate-meta.v1";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    z0: u64,
    /// Spacing of equally spaced observations.
    #[arg(long, requires = "n_obs", conflicts_with = "times")]
    dt: Option<f64>,
    /// Number of observations after time 0.
    #[arg(long, requires = "dt")]
    n_obs: Option<usize>,
    /// Comma-separated observation times after 0.
    #[arg(long, value_delimiter = ',', required_unless_present = "dt")]
    times: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Resample each path until its final count is positive.
    #[arg(long)]
    condition_nonextinct: bool,
    /// Number of trajectories.
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[arg(long)]
    max_events: Option<u64>,
    #[arg(long)]
    max_pop: Option<u64>,
    #[arg(long)]
    max_rejections: Option<u64>,
    /// Panel CSV path; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Metadata JSON path; defaults to `<output>.meta.json`, or stderr.
    #[arg(long)]
    metadata: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    schema: &'a str,
    artifact_version: &'a str,
    seed: u64,
    seed_was_generated: bool,
    replicates: usize,
    config: &'a SimConfig,
    rejections: Vec<u64>,
    total_rejections: u64,
    events: u64,
}

pub fn run(a: SimulateArgs) -> Result<u8, CliError> {
    let rates = Rates::new(a.lambda, a.mu)?;
    if a.replicates == 0 {
        return Err(CliError::usage("--replicates must be at least 1"));
    }
    let seed_was_generated = a.seed.is_none();
    let seed = a.seed.unwrap_or_else(auto_seed);
    let mut cfg = match (a.dt, a.n_obs, a.times) {
        (Some(dt), Some(n), None) => SimConfig::equally_spaced(rates, a.z0, dt, n, seed),
        (None, None, Some(times)) => SimConfig::new(rates, a.z0, times, seed),
        _ => return Err(CliError::usage("give either --dt with --n-obs, or --times")),
    }
    .conditioned(a.condition_nonextinct);
    if let Some(v) = a.max_events {
        cfg.max_events = v;
    }
    if let Some(v) = a.max_pop {
        cfg.max_pop = v;
    }
    if let Some(v) = a.max_rejections {
        cfg.max_rejections = v;
    }

    let mut trajectories = Vec::with_capacity(a.replicates);
    let mut rejections = Vec::with_capacity(a.replicates);
    let mut events = 0;
    for i in 0..a.replicates {
        let out = simulate_with(&cfg, &mut replicate_rng(seed, i as u64))?;
        rejections.push(out.rejections);
        events += out.events;
        trajectories.push(out.trajectory);
    }
    let panel = Panel::new(trajectories)?;

    let mut csv = Vec::new();
    write_panel(&mut csv, &panel, None)?;
    emit(a.output.as_deref(), &String::from_utf8_lossy(&csv))?;

    let meta = Metadata {
        schema: META_SCHEMA,
        artifact_version: ARTIFACT_VERSION,
        seed,
        seed_was_generated,
        replicates: a.replicates,
        config: &cfg,
        total_rejections: rejections.iter().sum(),
        rejections,
        events,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| CliError::usage(e.to_string()))?;
    let meta_path = a.metadata.or_else(|| {
        a.output.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".meta.json");
            PathBuf::from(s)
        })
    });
    match meta_path {
        Some(p) => emit(Some(&p), &(json + "\n"))?,
        None => eprintln!("{json}"),
    }
    Ok(0)
}
