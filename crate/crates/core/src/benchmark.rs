//! Monte-Carlo comparison of estimators on simulated panels.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Panel;
use crate::error::{Error, Result};
use crate::estimate::{fit, FitOptions, Method};
use crate::rates::Rates;
use crate::simulate::{replicate_rng, simulate_with, SimConfig};

pub const REPORT_SCHEMA: &str = "lbdp.benchmark.v1";

/// How inter-observation gaps are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapLaw {
    Equal { dt: f64 },
    /// Each gap drawn independently and uniformly from `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
}

/// One simulation setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub rates: Rates,
    pub z0: u64,
    /// Number of transitions `N` per trajectory.
    pub n_transitions: usize,
    /// Number of trajectories `M` per panel.
    pub m: usize,
    pub gaps: GapLaw,
    pub condition_nonextinct: bool,
}

impl Cell {
    fn validate(&self) -> Result<()> {
        if self.n_transitions == 0 || self.m == 0 || self.z0 == 0 {
            return Err(Error::Precondition("cell needs N >= 1, M >= 1 and Z0 >= 1".into()));
        }
        match self.gaps {
            GapLaw::Equal { dt } if dt > 0.0 && dt.is_finite() => Ok(()),
            GapLaw::Uniform { lo, hi } if lo > 0.0 && hi >= lo && hi.is_finite() => Ok(()),
            _ => Err(Error::Precondition(format!("invalid gap law {:?}", self.gaps))),
        }
    }
}

/// Simulates the panel of replicate `index`.
pub fn simulate_replicate(cell: &Cell, seed: u64, index: u64) -> Result<Panel> {
    cell.validate()?;
    let mut rng = replicate_rng(seed, index);
    let mut trajectories = Vec::with_capacity(cell.m);
    for _ in 0..cell.m {
        let obs_times: Vec<f64> = match cell.gaps {
            GapLaw::Equal { dt } => (1..=cell.n_transitions).map(|j| j as f64 * dt).collect(),
            GapLaw::Uniform { lo, hi } => {
                let mut t = 0.0;
                (0..cell.n_transitions)
                    .map(|_| {
                        t += if hi > lo { rng.random_range(lo..=hi) } else { lo };
                        t
                    })
                    .collect()
            }
        };
        let mut cfg = SimConfig::new(cell.rates, cell.z0, obs_times, seed);
        cfg.condition_nonextinct = cell.condition_nonextinct;
        trajectories.push(simulate_with(&cfg, &mut rng)?.trajectory);
    }
    Panel::new(trajectories)
}

/// Bias, sample standard deviation and RMSE of one parameter.
///
/// `sd` uses the `n - 1` denominator and `rmse = sqrt(mean((est - truth)^2))`,
/// so `rmse^2 = bias^2 + sd^2 (n - 1) / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
}

impl ErrorSummary {
    pub fn from_estimates(estimates: &[f64], truth: f64) -> Self {
        let n = estimates.len() as f64;
        if estimates.is_empty() {
            return Self { bias: f64::NAN, sd: f64::NAN, rmse: f64::NAN };
        }
        let mean = estimates.iter().sum::<f64>() / n;
        let ss: f64 = estimates.iter().map(|e| (e - mean).powi(2)).sum();
        let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / n;
        Self {
            bias: mean - truth,
            sd: if estimates.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 },
            rmse: mse.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    pub lambda: ErrorSummary,
    pub mu: ErrorSummary,
    pub omega: ErrorSummary,
    /// Replicates that produced an estimate.
    pub n_ok: usize,
    /// Replicates where the fit failed; excluded from the summaries.
    pub n_failed: usize,
    /// Replicates whose optimiser did not report convergence (still included).
    pub n_not_converged: usize,
    pub mean_wall_time_s: f64,
    /// First few failure messages.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema: String,
    pub cell: Cell,
    pub n_replicates: usize,
    pub seed: u64,
    /// Replicates whose panel could not be simulated.
    pub n_sim_failed: usize,
    pub rows: Vec<MethodRow>,
}

impl BenchmarkReport {
    pub fn row(&self, method: Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

type Estimate = std::result::Result<(f64, f64, bool, f64), String>;

/// Simulates `n_replicates` panels of `cell` and fits every method to each.
///
/// Replicate `i` uses random stream `i` of `seed`, and results are reduced
/// in replicate order, so the report does not depend on the thread count.
pub fn run_benchmark(
    cell: &Cell,
    methods: &[Method],
    n_replicates: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<BenchmarkReport> {
    cell.validate()?;
    let per_replicate: Vec<std::result::Result<Vec<Estimate>, String>> = (0..n_replicates)
        .into_par_iter()
        .map(|i| {
            let panel = simulate_replicate(cell, seed, i as u64).map_err(|e| e.to_string())?;
            let fit_opts = FitOptions {
                seed: opts.seed.wrapping_add(i as u64),
                ..*opts
            };
            Ok(methods
                .iter()
                .map(|&m| {
                    fit(&panel, m, &fit_opts)
                        .map_err(|e| e.to_string())
                        .and_then(|r| {
                            if r.rates.lambda().is_finite() && r.rates.mu().is_finite() {
                                Ok((r.rates.lambda(), r.rates.mu(), r.converged, r.wall_time_s))
                            } else {
                                Err("non-finite estimate".into())
                            }
                        })
                })
                .collect())
        })
        .collect();

    let n_sim_failed = per_replicate.iter().filter(|r| r.is_err()).count();
    let truth = cell.rates;
    let rows = methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let mut lam = Vec::new();
            let mut mu = Vec::new();
            let mut om = Vec::new();
            let mut n_failed = 0;
            let mut n_not_converged = 0;
            let mut time = 0.0;
            let mut failures = Vec::new();
            for rep in per_replicate.iter().flatten() {
                match &rep[j] {
                    Ok((l, m, conv, wt)) => {
                        lam.push(*l);
                        mu.push(*m);
                        om.push(l - m);
                        time += wt;
                        if !conv {
                            n_not_converged += 1;
                        }
                    }
                    Err(msg) => {
                        n_failed += 1;
                        if failures.len() < 5 {
                            failures.push(msg.clone());
                        }
                    }
                }
            }
            MethodRow {
                method,
                lambda: ErrorSummary::from_estimates(&lam, truth.lambda()),
                mu: ErrorSummary::from_estimates(&mu, truth.mu()),
                omega: ErrorSummary::from_estimates(&om, truth.omega()),
                n_ok: lam.len(),
                n_failed,
                n_not_converged,
                mean_wall_time_s: if lam.is_empty() { 0.0 } else { time / lam.len() as f64 },
                failures,
            }
        })
        .collect();
    Ok(BenchmarkReport {
        schema: REPORT_SCHEMA.into(),
        cell: *cell,
        n_replicates,
        seed,
        n_sim_failed,
        rows,
    })
}
