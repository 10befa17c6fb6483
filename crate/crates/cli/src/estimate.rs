use std::path::PathBuf;

use clap::Args;
use lbdp::estimate::{fit, Method};
use lbdp::io::{read_panel_file, ResultFile};

use crate::config::Config;
use crate::{emit, exit_code, CliError, FitArgs, EXIT_NOT_CONVERGED};

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Panel CSV with header trajectory_id,time,count.
    #[arg(long, short)]
    input: PathBuf,
    /// gw, qg, spmle, spmle-adjusted, mle, mv-spmle or all.
    #[arg(long, short)]
    method: String,
    /// Seed for optimiser restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    fit: FitArgs,
    /// Result JSON path; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn methods(spec: &str) -> Result<Vec<Method>, CliError> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    spec.split(',')
        .map(|s| s.parse::<Method>().map_err(|e| CliError::usage(e.to_string())))
        .collect()
}

/// Runs the requested methods in order; a failing method never stops the others.
///
/// With one method the exit code follows that method. With several, a
/// non-converged fit gives 4, and an error code is returned only when no
/// method produced an estimate.
pub fn run(a: EstimateArgs, cfg: &Config) -> Result<u8, CliError> {
    let list = methods(&a.method)?;
    let lp = read_panel_file(&a.input)?;
    let opts = a.fit.resolve(cfg.fit, a.seed);

    let mut files = Vec::with_capacity(list.len());
    let mut outcomes: Vec<Result<bool, u8>> = Vec::with_capacity(list.len());
    for &m in &list {
        match fit(&lp.panel, m, &opts) {
            Ok(r) => {
                outcomes.push(Ok(r.converged));
                if !r.converged {
                    eprintln!("warning: {m} did not converge");
                }
                files.push(ResultFile::from_result(&r, a.seed));
            }
            Err(e) => {
                eprintln!("error: {m}: {e}");
                outcomes.push(Err(exit_code(&e)));
                files.push(ResultFile::from_error(m, &e, a.seed));
            }
        }
    }

    let json = if files.len() == 1 && !a.method.eq_ignore_ascii_case("all") {
        serde_json::to_string_pretty(&files[0])
    } else {
        serde_json::to_string_pretty(&files)
    }
    .map_err(|e| CliError::usage(e.to_string()))?;
    emit(a.output.as_deref(), &(json + "\n"))?;

    let code = if outcomes.iter().all(|o| o.is_err()) {
        outcomes.iter().filter_map(|o| o.err()).min().unwrap_or(0)
    } else if outcomes.contains(&Ok(false)) {
        EXIT_NOT_CONVERGED
    } else {
        0
    };
    Ok(code)
}
