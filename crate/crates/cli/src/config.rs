//! Optional TOML configuration shared by the subcommands.
//!
//! ```toml
//! [fit]
//! tol = 1e-9
//! restarts = 3
//!
//! [benchmark]
//! lambda = [7.0]
//! mu = [5.0]
//! z0 = [1, 10]
//! n_transitions = [29]
//! m = [1]
//! dt = 0.1
//! replicates = 1000
//! methods = ["gw", "spmle"]
//! ```
//!
//! Command-line flags take precedence over the file.

use std::path::Path;

use lbdp::estimate::FitOptions;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub fit: Option<FitOptions>,
    #[serde(default)]
    pub benchmark: BenchmarkConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub lambda: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub z0: Option<Vec<u64>>,
    pub n_transitions: Option<Vec<usize>>,
    pub m: Option<Vec<usize>>,
    pub dt: Option<f64>,
    pub gap_uniform: Option<[f64; 2]>,
    pub condition_nonextinct: Option<bool>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<String>>,
}

pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
}
