//! One entry point for every estimator, with observed-information
//! standard errors for the likelihood-based ones.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{Panel, SPACING_TOL};
use crate::error::{Error, Result};
use crate::gw::{gw_estimate, gw_invert, gw_moments, Regime};
use crate::multivariate::mv_loglik;
use crate::optimize::{minimize_2d, SimplexOptions};
use crate::process::exact_loglik;
use crate::quasi::{initial_omega, qg_fit_with, CumulantMode};
use crate::rates::{Cov2, Rates};
use crate::saddlepoint::{spa_loglik, SpaVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gw,
    Qg,
    Spmle,
    SpmleAdjusted,
    Mle,
    MvSpmle,
}

impl Method {
    /// Every method, in the fixed order used by `--method all`.
    pub const ALL: [Method; 6] = [
        Method::Gw,
        Method::Qg,
        Method::Spmle,
        Method::SpmleAdjusted,
        Method::Mle,
        Method::MvSpmle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Gw => "gw",
            Method::Qg => "qg",
            Method::Spmle => "spmle",
            Method::SpmleAdjusted => "spmle-adjusted",
            Method::Mle => "mle",
            Method::MvSpmle => "mv-spmle",
        }
    }

    fn index(&self) -> u64 {
        Method::ALL.iter().position(|m| m == self).unwrap() as u64
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == norm)
            .ok_or_else(|| {
                Error::Precondition(format!(
                    "unknown method '{s}'; expected one of gw, qg, spmle, spmle-adjusted, mle, mv-spmle"
                ))
            })
    }
}

/// Flat estimation options; every field has a default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub tol: f64,
    pub restarts: usize,
    pub max_iters: u64,
    pub initial_step: f64,
    pub seed: u64,
    /// The exact likelihood refuses panels with a larger count.
    pub mle_count_cap: u64,
    pub qg_cumulants: CumulantMode,
    pub spacing_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        let s = SimplexOptions::default();
        Self {
            tol: s.tol,
            restarts: s.restarts,
            max_iters: s.max_iters,
            initial_step: s.initial_step,
            seed: s.seed,
            mle_count_cap: 100_000,
            qg_cumulants: CumulantMode::Gaussian,
            spacing_tol: SPACING_TOL,
        }
    }
}

impl FitOptions {
    fn simplex(&self, method: Method) -> SimplexOptions {
        SimplexOptions {
            tol: self.tol,
            restarts: self.restarts,
            max_iters: self.max_iters,
            initial_step: self.initial_step,
            seed: self
                .seed
                .wrapping_add(method.index().wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub method: Method,
    pub rates: Rates,
    pub omega_hat: f64,
    /// Covariance of `(lambda_hat, mu_hat)`.
    pub cov: Option<Cov2>,
    pub se_lambda: Option<f64>,
    pub se_mu: Option<f64>,
    pub se_omega: Option<f64>,
    pub loglik: Option<f64>,
    pub converged: bool,
    pub n_obj_evals: usize,
    pub wall_time_s: f64,
    pub diagnostics: Vec<String>,
}

impl EstimateResult {
    fn new(method: Method, rates: Rates, cov: Option<Cov2>) -> Self {
        let mut out = Self {
            method,
            rates,
            omega_hat: rates.lambda() - rates.mu(),
            cov: None,
            se_lambda: None,
            se_mu: None,
            se_omega: None,
            loglik: None,
            converged: true,
            n_obj_evals: 0,
            wall_time_s: 0.0,
            diagnostics: Vec::new(),
        };
        out.set_cov(cov);
        out
    }

    fn set_cov(&mut self, cov: Option<Cov2>) {
        self.cov = cov;
        if let Some(c) = cov {
            self.se_lambda = Some(c[0][0].max(0.0).sqrt());
            self.se_mu = Some(c[1][1].max(0.0).sqrt());
            self.se_omega = Some((c[0][0] + c[1][1] - 2.0 * c[0][1]).max(0.0).sqrt());
        }
    }
}

/// Covariance of `(lambda, mu)` from the observed information of
/// `loglik` in `(log lambda, log mu)` at its maximiser `theta_hat`.
pub fn numeric_hessian_se<F: Fn([f64; 2]) -> f64>(loglik: F, theta_hat: [f64; 2]) -> Result<Cov2> {
    let h = [0, 1].map(|i| f64::EPSILON.cbrt() * theta_hat[i].abs().max(1.0));
    let at = |di: f64, dj: f64| loglik([theta_hat[0] + di, theta_hat[1] + dj]);
    let f0 = at(0.0, 0.0);
    let d2 = |i: usize| {
        let e = |s: f64| if i == 0 { at(s * h[0], 0.0) } else { at(0.0, s * h[1]) };
        -(e(1.0) - 2.0 * f0 + e(-1.0)) / (h[i] * h[i])
    };
    let h00 = d2(0);
    let h11 = d2(1);
    let h01 = -(at(h[0], h[1]) - at(h[0], -h[1]) - at(-h[0], h[1]) + at(-h[0], -h[1]))
        / (4.0 * h[0] * h[1]);
    let det = h00 * h11 - h01 * h01;
    if !(h00 > 0.0 && h11 > 0.0 && det > 0.0) || !det.is_finite() {
        return Err(Error::Degenerate(
            "observed information is not positive definite".into(),
        ));
    }
    let inv = [[h11 / det, -h01 / det], [-h01 / det, h00 / det]];
    let jac = [theta_hat[0].exp(), theta_hat[1].exp()];
    let off = jac[0] * jac[1] * inv[0][1];
    Ok([
        [jac[0] * jac[0] * inv[0][0], off],
        [off, jac[1] * jac[1] * inv[1][1]],
    ])
}

/// Starting rates: the GW inversion on equally spaced data, otherwise
/// `omega = omega_init`, `xi = 2 |omega_init| + 1`.
pub fn starting_rates(panel: &Panel, spacing_tol: f64) -> Rates {
    if panel.equal_spacing(spacing_tol) {
        if let Ok(inv) = gw_moments(panel).and_then(|m| gw_invert(&m)) {
            if inv.rates.lambda() > 0.0 && inv.rates.mu() > 0.0 && inv.rates.xi().is_finite() {
                return inv.rates;
            }
        }
    }
    let omega = initial_omega(panel);
    let omega = if omega.is_finite() { omega } else { 0.0 };
    Rates::from_omega_xi(omega, 2.0 * omega.abs() + 1.0).expect("xi > |omega| by construction")
}

fn likelihood_fit<L>(panel: &Panel, method: Method, opts: &FitOptions, loglik: L) -> Result<EstimateResult>
where
    L: Fn(Rates) -> Result<f64>,
{
    let start = starting_rates(panel, opts.spacing_tol);
    let objective = |th: [f64; 2]| match Rates::new(th[0].exp(), th[1].exp()) {
        Ok(r) => loglik(r).map(|v| -v).unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    };
    let x0 = [start.lambda().ln(), start.mu().ln()];
    let m = minimize_2d(objective, x0, &opts.simplex(method));
    if !m.value.is_finite() {
        return Err(Error::Solver(format!(
            "{method}: objective is not finite at any visited point"
        )));
    }
    let rates = Rates::new(m.x[0].exp(), m.x[1].exp())?;
    let mut out = EstimateResult::new(method, rates, None);
    out.loglik = Some(-m.value);
    out.converged = m.converged;
    out.n_obj_evals = m.n_evals;
    match numeric_hessian_se(|th| -objective(th), m.x) {
        Ok(cov) => out.set_cov(Some(cov)),
        Err(e) => out.diagnostics.push(format!("standard errors unavailable: {e}")),
    }
    out.diagnostics.push("standard errors from observed information".into());
    if !m.converged {
        out.diagnostics
            .push("simplex restarts kept improving the objective".into());
    }
    Ok(out)
}

fn fit_inner(panel: &Panel, method: Method, opts: &FitOptions) -> Result<EstimateResult> {
    match method {
        Method::Gw => {
            let est = gw_estimate(panel)?;
            let v = est.se_lambda * est.se_lambda;
            let mut out = EstimateResult::new(method, est.rates, Some([[v, v], [v, v]]));
            out.se_omega = Some(est.se_omega);
            if est.regime == Regime::NearCriticalWarning {
                out.diagnostics
                    .push("near-critical offspring mean: asymptotic SEs unreliable".into());
            }
            if est.clamped {
                out.diagnostics.push("negative rate clamped to zero".into());
            }
            Ok(out)
        }
        Method::Qg => {
            let fit = qg_fit_with(panel, opts.qg_cumulants)?;
            let mut out = EstimateResult::new(method, fit.rates, fit.cov_lambda_mu);
            out.loglik = fit.loglik;
            out.n_obj_evals = fit.profile_iterations as usize;
            if fit.degenerate {
                out.diagnostics
                    .push("degenerate fit: every transition matches one growth rate exactly".into());
            }
            if fit.boundary {
                out.diagnostics
                    .push("fit on the parameter boundary; a rate was clamped to zero".into());
            }
            if fit.multimodal {
                out.diagnostics
                    .push("profile has several stationary points; the highest local maximum is reported".into());
            }
            Ok(out)
        }
        Method::Spmle => likelihood_fit(panel, method, opts, |r| {
            spa_loglik(panel, r, SpaVariant::Plain)
        }),
        Method::SpmleAdjusted => likelihood_fit(panel, method, opts, |r| {
            spa_loglik(panel, r, SpaVariant::Conditional)
        }),
        Method::Mle => {
            let max = panel.max_count();
            if max > opts.mle_count_cap {
                return Err(Error::ResourceCap(format!(
                    "exact likelihood refused: count {max} exceeds the cap {}",
                    opts.mle_count_cap
                )));
            }
            likelihood_fit(panel, method, opts, |r| exact_loglik(panel, r))
        }
        Method::MvSpmle => likelihood_fit(panel, method, opts, |r| mv_loglik(panel, r)),
    }
}

/// Fits `method` to `panel`.
pub fn fit(panel: &Panel, method: Method, opts: &FitOptions) -> Result<EstimateResult> {
    let start = Instant::now();
    let mut out = fit_inner(panel, method, opts)?;
    out.wall_time_s = start.elapsed().as_secs_f64();
    Ok(out)
}

/// One row of [`compare`]: a fit or the error it produced.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub method: Method,
    pub outcome: std::result::Result<EstimateResult, Error>,
    pub wall_time_s: f64,
}

/// Runs each method in order; failures are kept per row.
pub fn compare(panel: &Panel, methods: &[Method], opts: &FitOptions) -> Vec<CompareRow> {
    methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let outcome = fit(panel, method, opts);
            CompareRow {
                method,
                outcome,
                wall_time_s: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}
