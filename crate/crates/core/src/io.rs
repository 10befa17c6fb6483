//! File formats: panel CSV, estimation result JSON and benchmark reports.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::benchmark::{BenchmarkReport, GapLaw};
use crate::data::{Panel, Trajectory};
use crate::error::{Error, Result};
use crate::estimate::{EstimateResult, Method};
use crate::rates::Cov2;

pub const PANEL_SCHEMA: &str = "lbdp.panel.v1";
pub const RESULT_SCHEMA: &str = "lbdp.result.v1";
pub const BENCHMARK_CSV_SCHEMA: &str = "lbdp.benchmark-csv.v1";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

const PANEL_HEADER: [&str; 3] = ["trajectory_id", "time", "count"];

/// A panel together with the trajectory labels it was read with.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledPanel {
    pub ids: Vec<String>,
    pub panel: Panel,
}

fn parse_err(row: usize, message: impl Into<String>) -> Error {
    Error::Parse { row, message: message.into() }
}

/// Reads a panel CSV with header `trajectory_id,time,count`.
///
/// Lines starting with `#` are ignored. Trajectories keep the order of
/// their first appearance; rows within a trajectory are sorted by time.
/// Row numbers in errors are 1-based file line numbers.
pub fn read_panel<R: Read>(reader: R) -> Result<LabelledPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let header_line = header.position().map(|p| p.line() as usize).unwrap_or(1);
    if header.iter().collect::<Vec<_>>() != PANEL_HEADER {
        return Err(parse_err(
            header_line,
            format!("expected header 'trajectory_id,time,count', found '{}'", header.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<(f64, u64, usize)>> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(row, e.to_string())
        })?;
        if !more {
            break;
        }
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 3 {
            return Err(parse_err(row, format!("expected 3 fields, found {}", record.len())));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(parse_err(row, "empty trajectory_id"));
        }
        let time: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(row, format!("time '{}' is not a number", &record[1])))?;
        if !time.is_finite() {
            return Err(parse_err(row, "time must be finite"));
        }
        let count: u64 = record[2]
            .parse()
            .map_err(|_| parse_err(row, format!("count '{}' is not a nonnegative integer", &record[2])))?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            ids.push(id.clone());
            rows.push(Vec::new());
            rows.len() - 1
        });
        rows[slot].push((time, count, row));
    }
    if ids.is_empty() {
        return Err(parse_err(header_line + 1, "no data rows"));
    }

    let mut trajectories = Vec::with_capacity(ids.len());
    for (id, mut obs) in ids.iter().zip(rows) {
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = obs.windows(2).find(|w| w[0].0 == w[1].0) {
            let (first, second) = (w[0].2.min(w[1].2), w[0].2.max(w[1].2));
            return Err(parse_err(
                second,
                format!("duplicate time {} for trajectory '{id}' (also on row {first})", w[0].0),
            ));
        }
        let first_row = obs.iter().map(|o| o.2).min().unwrap_or(0);
        let times = obs.iter().map(|o| o.0).collect();
        let counts = obs.iter().map(|o| o.1).collect();
        let traj = Trajectory::new(times, counts).map_err(|e| {
            parse_err(first_row, format!("trajectory '{id}': {e}"))
        })?;
        trajectories.push(traj);
    }
    Ok(LabelledPanel { ids, panel: Panel::new(trajectories)? })
}

pub fn read_panel_file(path: &std::path::Path) -> Result<LabelledPanel> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    read_panel(std::io::BufReader::new(file))
}

/// Writes a panel CSV; trajectories are labelled `0, 1, ...` unless `ids` is given.
pub fn write_panel<W: Write>(writer: W, panel: &Panel, ids: Option<&[String]>) -> Result<()> {
    if let Some(ids) = ids {
        if ids.len() != panel.n_trajectories() {
            return Err(Error::Precondition("one id per trajectory is required".into()));
        }
    }
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "# schema: {PANEL_SCHEMA}")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(PANEL_HEADER).map_err(csv_err)?;
    for (i, traj) in panel.trajectories().iter().enumerate() {
        let id = ids.map(|v| v[i].clone()).unwrap_or_else(|| i.to_string());
        for (t, k) in traj.times().iter().zip(traj.counts()) {
            csv.write_record([id.as_str(), &t.to_string(), &k.to_string()]).map_err(csv_err)?;
        }
    }
    csv.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// JSON form of one estimation outcome.
///
/// Floats are written in the shortest form that parses back to the same
/// `f64`, so a write/read cycle is lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub schema: String,
    pub artifact_version: String,
    pub method: Method,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub omega: Option<f64>,
    pub se_lambda: Option<f64>,
    pub se_mu: Option<f64>,
    pub se_omega: Option<f64>,
    pub cov: Option<Cov2>,
    pub loglik: Option<f64>,
    pub converged: bool,
    pub diagnostics: Vec<String>,
    pub seed: u64,
    #[serde(default)]
    pub n_obj_evals: usize,
    #[serde(default)]
    pub wall_time_s: f64,
    /// Set when the method failed; the estimate fields are then absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultFile {
    pub fn from_result(r: &EstimateResult, seed: u64) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        Self {
            schema: RESULT_SCHEMA.into(),
            artifact_version: ARTIFACT_VERSION.into(),
            method: r.method,
            lambda: finite(r.rates.lambda()),
            mu: finite(r.rates.mu()),
            omega: finite(r.omega_hat),
            se_lambda: r.se_lambda.and_then(finite),
            se_mu: r.se_mu.and_then(finite),
            se_omega: r.se_omega.and_then(finite),
            cov: r.cov.filter(|c| c.iter().flatten().all(|x| x.is_finite())),
            loglik: r.loglik.and_then(finite),
            converged: r.converged,
            diagnostics: r.diagnostics.clone(),
            seed,
            n_obj_evals: r.n_obj_evals,
            wall_time_s: r.wall_time_s,
            error: None,
        }
    }

    pub fn from_error(method: Method, err: &Error, seed: u64) -> Self {
        Self {
            schema: RESULT_SCHEMA.into(),
            artifact_version: ARTIFACT_VERSION.into(),
            method,
            lambda: None,
            mu: None,
            omega: None,
            se_lambda: None,
            se_mu: None,
            se_omega: None,
            cov: None,
            loglik: None,
            converged: false,
            diagnostics: Vec::new(),
            seed,
            n_obj_evals: 0,
            wall_time_s: 0.0,
            error: Some(err.to_string()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| parse_err(e.line(), e.to_string()))
    }
}

pub fn benchmark_to_json(report: &BenchmarkReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))
}

pub fn benchmark_from_json(s: &str) -> Result<BenchmarkReport> {
    serde_json::from_str(s).map_err(|e| parse_err(e.line(), e.to_string()))
}

pub const BENCHMARK_CSV_HEADER: [&str; 20] = [
    "cell", "lambda_true", "mu_true", "z0", "n_transitions", "m", "gaps", "condition_nonextinct",
    "n_replicates", "seed", "method", "parameter", "bias", "sd", "rmse", "n_ok", "n_failed",
    "n_not_converged", "n_sim_failed", "mean_wall_time_s",
];

/// Writes one row per (cell, method, parameter), preceded by a schema line.
pub fn write_benchmark_csv<W: Write>(writer: W, reports: &[BenchmarkReport]) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "# schema: {BENCHMARK_CSV_SCHEMA}")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(BENCHMARK_CSV_HEADER).map_err(csv_err)?;
    for (ci, rep) in reports.iter().enumerate() {
        let c = &rep.cell;
        let gaps = match c.gaps {
            GapLaw::Equal { dt } => format!("equal:{dt}"),
            GapLaw::Uniform { lo, hi } => format!("uniform:{lo}:{hi}"),
        };
        for row in &rep.rows {
            for (name, s) in [("lambda", row.lambda), ("mu", row.mu), ("omega", row.omega)] {
                csv.write_record([
                    ci.to_string(),
                    c.rates.lambda().to_string(),
                    c.rates.mu().to_string(),
                    c.z0.to_string(),
                    c.n_transitions.to_string(),
                    c.m.to_string(),
                    gaps.clone(),
                    c.condition_nonextinct.to_string(),
                    rep.n_replicates.to_string(),
                    rep.seed.to_string(),
                    row.method.name().to_string(),
                    name.to_string(),
                    s.bias.to_string(),
                    s.sd.to_string(),
                    s.rmse.to_string(),
                    row.n_ok.to_string(),
                    row.n_failed.to_string(),
                    row.n_not_converged.to_string(),
                    rep.n_sim_failed.to_string(),
                    row.mean_wall_time_s.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}
