use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use lbdp::process::transition_pmf;
use lbdp::saddlepoint::{spa_pmf, spa_pmf_conditional, spa_pmf_normalized_table};
use lbdp::Rates;

use crate::{emit, CliError};

pub const PMF_SCHEMA: &str = "lbdp.pmf.v1";
/// Written in place of values that were not computed.
pub const MISSING: &str = "NA";

#[derive(Debug, Args)]
pub struct PmfArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    a: u64,
    #[arg(long)]
    k_max: u64,
    /// Largest number of summation terms spent on the exact column;
    /// above it the exact and ratio columns are written as NA.
    #[arg(long, default_value_t = 50_000_000)]
    exact_cost_cap: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Number of terms the exact pmf sums over for `k = 0..=k_max`.
pub fn exact_cost(a: u64, k_max: u64) -> u64 {
    let (a, k) = (a as u128, k_max as u128);
    let total = if k < a {
        (k + 1).saturating_mul(k + 2) / 2
    } else {
        (a.saturating_mul(a + 1) / 2).saturating_add((k - a + 1).saturating_mul(a + 1))
    };
    total.min(u64::MAX as u128) as u64
}

fn cell(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => v.to_string(),
        _ => MISSING.into(),
    }
}

fn ratio(num: f64, den: Option<f64>) -> Option<f64> {
    den.filter(|d| *d > 0.0).map(|d| num / d)
}

pub fn run(a: PmfArgs) -> Result<u8, CliError> {
    let rates = Rates::new(a.lambda, a.mu)?;
    if !(a.t > 0.0 && a.t.is_finite()) {
        return Err(CliError::usage("--t must be positive and finite"));
    }
    if a.a == 0 {
        return Err(CliError::usage("--a must be at least 1"));
    }
    let exact = if exact_cost(a.a, a.k_max) <= a.exact_cost_cap {
        Some(transition_pmf(a.t, a.a, rates, a.k_max)?)
    } else {
        eprintln!(
            "note: exact column skipped, cost {} exceeds --exact-cost-cap {}",
            exact_cost(a.a, a.k_max),
            a.exact_cost_cap
        );
        None
    };
    let normalized = spa_pmf_normalized_table(a.t, a.a, rates, a.k_max)?;

    let mut out = String::new();
    writeln!(out, "# schema: {PMF_SCHEMA}").unwrap();
    writeln!(out, "# lambda={} mu={} t={} a={}", a.lambda, a.mu, a.t, a.a).unwrap();
    out.push_str("k,exact,spa,spa_normalized,spa_conditional,ratio_spa,ratio_spa_normalized,ratio_spa_conditional\n");
    for k in 0..=a.k_max {
        let ex = exact.as_ref().map(|v| v[k as usize]);
        let s = spa_pmf(k, a.t, a.a, rates)?;
        let sn = normalized[k as usize];
        let sc = spa_pmf_conditional(k, a.t, a.a, rates)?;
        writeln!(
            out,
            "{k},{},{s},{sn},{sc},{},{},{}",
            cell(ex),
            cell(ratio(s, ex)),
            cell(ratio(sn, ex)),
            cell(ratio(sc, ex)),
        )
        .unwrap();
    }
    emit(a.output.as_deref(), &out)?;
    Ok(0)
}
