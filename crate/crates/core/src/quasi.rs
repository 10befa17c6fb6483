//! Gaussian quasi-likelihood for arbitrary observation gaps.
//!
//! Conditionally on `Z_{j-1} = k`, `Z_j` is treated as normal with mean
//! `k exp(omega tau)` and variance `k xi nu(omega, tau)`, where
//! `nu = tau exp(omega tau) / c(omega tau)` and `c(u) = u / (exp(u) - 1)`.

use serde::{Deserialize, Serialize};

use crate::data::{Panel, Transition};
use crate::error::{domain, Error, Result};
use crate::optimize::brent_root;
use crate::rates::{Cov2, Rates};
use crate::saddlepoint::{cgf_eval, max_cgf_arg};
use crate::special::{kappa, kappa_prime, LogSumExp};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Half-width of the initial search bracket, in units of `1 / mean gap`.
pub const BRACKET_HALF_WIDTH: f64 = 10.0;
pub const BRACKET_WIDENINGS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QgParams {
    pub omega: f64,
    pub xi: f64,
}

impl QgParams {
    pub fn new(omega: f64, xi: f64) -> Result<Self> {
        if !(omega.is_finite() && xi.is_finite()) || xi + omega <= 0.0 || xi - omega <= 0.0 {
            return domain(format!(
                "(omega, xi) = ({omega}, {xi}) is outside xi > |omega|"
            ));
        }
        Ok(Self { omega, xi })
    }

    pub fn from_rates(rates: Rates) -> Self {
        Self {
            omega: rates.omega(),
            xi: rates.xi(),
        }
    }

    pub fn rates(&self) -> Result<Rates> {
        Rates::new(0.5 * (self.xi + self.omega), 0.5 * (self.xi - self.omega))
    }
}

/// Which conditional third and fourth cumulants enter the score covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CumulantMode {
    /// Gaussian working model: both cumulants zero, so the sandwich is `I^-1`.
    #[default]
    Gaussian,
    /// Cumulants of the birth-death increment at the fitted rates.
    Lbdp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QgFit {
    pub params: QgParams,
    pub rates: Rates,
    /// Covariance of `(lambda, mu)`; absent for boundary or degenerate fits.
    pub cov_lambda_mu: Option<Cov2>,
    /// Quasi-log-likelihood at the fit; `None` when the fit is degenerate.
    pub loglik: Option<f64>,
    pub profile_iterations: u64,
    /// `xi_hat <= |omega_hat|`: a rate was clamped at zero.
    pub boundary: bool,
    /// Every transition is reproduced exactly by one growth rate, so `xi_hat = 0`.
    pub degenerate: bool,
    /// The profile is not unimodal over the search interval; the highest
    /// interior local maximum was taken.
    pub multimodal: bool,
}

/// Per-transition quantities at a given `omega`.
#[derive(Debug, Clone, Copy)]
struct Term {
    start: f64,
    tau: f64,
    u: f64,
    ln_nu: f64,
    /// `d log nu / d omega`.
    dln_nu: f64,
    /// `log((k_j - k zeta)^2 / (k nu))`; `-inf` on an exact fit.
    ln_q: f64,
    /// `d log q / d omega`, zero when `ln_q = -inf`.
    dln_q: f64,
}

fn term(tr: Transition, omega: f64) -> Term {
    let k = tr.start as f64;
    let tau = tr.tau;
    let u = omega * tau;
    let ln_nu = tau.ln() + u + kappa(u);
    let dln_nu = tau * (1.0 + kappa_prime(u));
    let ln_k = k.ln();
    // d = log(k zeta / k_j); r = k_j - k zeta has the sign of -d.
    let (ln_abs_r, dln_q) = if tr.end == 0 {
        (ln_k + u, 2.0 * tau - dln_nu)
    } else {
        let d = u + ln_k - (tr.end as f64).ln();
        if d == 0.0 {
            (f64::NEG_INFINITY, 0.0)
        } else {
            let one_minus_rho = -(-d).exp_m1();
            let ln_abs_r = ln_k + u + one_minus_rho.abs().ln();
            (ln_abs_r, 2.0 * tau / one_minus_rho - dln_nu)
        }
    };
    Term {
        start: k,
        tau,
        u,
        ln_nu,
        dln_nu,
        ln_q: 2.0 * ln_abs_r - ln_k - ln_nu,
        dln_q,
    }
}

fn terms(panel: &Panel, omega: f64) -> Vec<Term> {
    panel.live_transitions().map(|tr| term(tr, omega)).collect()
}

fn ln_sum_q(ts: &[Term]) -> f64 {
    let mut acc = LogSumExp::default();
    for t in ts {
        acc.push(t.ln_q);
    }
    acc.value()
}

/// Quasi-log-likelihood, including the `2 pi` constant.
pub fn qg_loglik(panel: &Panel, params: QgParams) -> Result<f64> {
    let params = QgParams::new(params.omega, params.xi)?;
    let ln_xi = params.xi.ln();
    let ll = terms(panel, params.omega)
        .iter()
        .map(|t| -0.5 * (LN_2PI + t.start.ln() + ln_xi + t.ln_nu + (t.ln_q - ln_xi).exp()))
        .sum();
    Ok(ll)
}

/// Number of transitions entering the quasi-likelihood.
pub fn qg_n_terms(panel: &Panel) -> usize {
    panel.live_transitions().count()
}

/// Maximiser of the quasi-likelihood over `xi` at fixed `omega`.
pub fn qg_profile_xi(panel: &Panel, omega: f64) -> Result<f64> {
    if !omega.is_finite() {
        return domain(format!("omega must be finite, got {omega}"));
    }
    let ts = terms(panel, omega);
    Ok(ln_sum_q(&ts).exp() / ts.len() as f64)
}

/// Profile quasi-log-likelihood `l(xi_hat(omega), omega)`.
pub fn qg_profile_loglik(panel: &Panel, omega: f64) -> Result<f64> {
    if !omega.is_finite() {
        return domain(format!("omega must be finite, got {omega}"));
    }
    let ts = terms(panel, omega);
    let n = ts.len() as f64;
    let ln_xi = ln_sum_q(&ts) - n.ln();
    let base: f64 = ts.iter().map(|t| LN_2PI + t.start.ln() + t.ln_nu).sum();
    Ok(-0.5 * base - 0.5 * n * ln_xi - 0.5 * n)
}

/// Analytic derivative of the profile quasi-log-likelihood in `omega`.
pub fn qg_profile_derivative(panel: &Panel, omega: f64) -> f64 {
    let ts = terms(panel, omega);
    let n = ts.len() as f64;
    let lse = ln_sum_q(&ts);
    let weighted: f64 = ts
        .iter()
        .filter(|t| t.ln_q > f64::NEG_INFINITY)
        .map(|t| (t.ln_q - lse).exp() * t.dln_q)
        .sum();
    let nu_part: f64 = ts.iter().map(|t| t.dln_nu).sum();
    -0.5 * n * weighted - 0.5 * nu_part
}

/// Starting growth rate `log(sum k_j / sum k_{j-1}) / mean gap`.
pub fn initial_omega(panel: &Panel) -> f64 {
    let (next, prev) = panel
        .live_transitions()
        .fold((0.0, 0.0), |(n, p), tr| (n + tr.end as f64, p + tr.start as f64));
    (next.max(0.5) / prev).ln() / panel.mean_gap()
}

/// The search bracket used by [`qg_fit`] before any widening.
pub fn initial_bracket(panel: &Panel) -> (f64, f64) {
    let centre = initial_omega(panel);
    let half = BRACKET_HALF_WIDTH / panel.mean_gap();
    (centre - half, centre + half)
}

/// Growth rate reproducing every transition exactly, if one exists.
fn exact_growth_rate(panel: &Panel) -> Option<f64> {
    let mut rate = None::<f64>;
    for tr in panel.live_transitions() {
        if tr.end == 0 {
            return None;
        }
        let r = ((tr.end as f64).ln() - (tr.start as f64).ln()) / tr.tau;
        match rate {
            None => rate = Some(r),
            Some(r0) if (r - r0).abs() <= 1e-12 * r0.abs().max(1e-300) || r == r0 => {}
            Some(_) => return None,
        }
    }
    rate
}

fn clamp_rates(omega: f64, xi: f64) -> Result<(Rates, bool)> {
    let lambda = 0.5 * (xi + omega);
    let mu = 0.5 * (xi - omega);
    let clamped = lambda <= 0.0 || mu <= 0.0;
    let rates = Rates::new(lambda.max(0.0), mu.max(0.0))
        .map_err(|_| Error::Degenerate(format!("fit (omega = {omega}, xi = {xi}) has no admissible rates")))?;
    Ok((rates, clamped))
}

/// Maximises the profile quasi-likelihood in `omega`, then sets `xi = xi_hat(omega)`.
pub fn qg_fit(panel: &Panel) -> Result<QgFit> {
    qg_fit_with(panel, CumulantMode::Gaussian)
}

pub fn qg_fit_with(panel: &Panel, mode: CumulantMode) -> Result<QgFit> {
    if let Some(omega) = exact_growth_rate(panel) {
        let (rates, _) = clamp_rates(omega, 0.0)?;
        return Ok(QgFit {
            params: QgParams { omega, xi: 0.0 },
            rates,
            cov_lambda_mu: None,
            loglik: None,
            profile_iterations: 0,
            boundary: true,
            degenerate: true,
            multimodal: false,
        });
    }
    let centre = initial_omega(panel);
    let mut half = BRACKET_HALF_WIDTH / panel.mean_gap();
    let deriv = |w: f64| qg_profile_derivative(panel, w);
    let mut bracket = None;
    for i in 0..=BRACKET_WIDENINGS {
        let (lo, hi) = (centre - half, centre + half);
        if deriv(lo) > 0.0 && deriv(hi) < 0.0 {
            bracket = Some((lo, hi));
            break;
        }
        if i < BRACKET_WIDENINGS {
            half *= 2.0;
        }
    }
    let multimodal = bracket.is_none();
    let (lo, hi) = match bracket {
        Some(b) => b,
        None => best_local_maximum(panel, centre - half, centre + half)?,
    };
    let (omega, iterations) = brent_root(deriv, lo, hi, 1e-14 * (1.0 + centre.abs()))?;
    let xi = qg_profile_xi(panel, omega)?;
    let (rates, boundary) = clamp_rates(omega, xi)?;
    let params = QgParams { omega, xi };
    let (loglik, cov) = if boundary {
        (qg_profile_loglik(panel, omega)?, None)
    } else {
        (qg_loglik(panel, params)?, Some(qg_sandwich_cov_with(panel, params, mode)?))
    };
    Ok(QgFit {
        params,
        rates,
        cov_lambda_mu: cov,
        loglik: Some(loglik),
        profile_iterations: iterations,
        boundary,
        degenerate: false,
        multimodal,
    })
}

/// Grid cell around the highest interior local maximum of the profile on `[lo, hi]`.
fn best_local_maximum(panel: &Panel, lo: f64, hi: f64) -> Result<(f64, f64)> {
    const GRID: usize = 2000;
    let step = (hi - lo) / GRID as f64;
    let mut best: Option<(f64, (f64, f64))> = None;
    let mut prev = (lo, qg_profile_derivative(panel, lo));
    for i in 1..=GRID {
        let w = lo + i as f64 * step;
        let d = qg_profile_derivative(panel, w);
        if prev.1 > 0.0 && d < 0.0 {
            let mid = 0.5 * (prev.0 + w);
            let value = qg_profile_loglik(panel, mid)?;
            if best.is_none_or(|(v, _)| value > v) {
                best = Some((value, (prev.0, w)));
            }
        }
        prev = (w, d);
    }
    best.map(|(_, b)| b).ok_or_else(|| {
        Error::Solver("profile quasi-likelihood has no interior maximum in the search interval".into())
    })
}

/// Plug-in information matrix in `(xi, omega)` coordinates.
pub fn qg_information(panel: &Panel, params: QgParams) -> Result<Cov2> {
    let params = QgParams::new(params.omega, params.xi)?;
    let xi = params.xi;
    let ts = terms(panel, params.omega);
    let n = ts.len() as f64;
    let sum_dln: f64 = ts.iter().map(|t| t.dln_nu).sum();
    let sum_dln2: f64 = ts.iter().map(|t| t.dln_nu * t.dln_nu).sum();
    // k zeta_dot^2 / nu with zeta_dot = tau zeta
    let sum_mean: f64 = ts
        .iter()
        .map(|t| t.start * (2.0 * t.tau.ln() + 2.0 * t.u - t.ln_nu).exp())
        .sum();
    let i_xx = n / (2.0 * xi * xi);
    let i_xw = sum_dln / (2.0 * xi);
    let i_ww = 0.5 * sum_dln2 + sum_mean / xi;
    Ok([[i_xx, i_xw], [i_xw, i_ww]])
}

/// Standardised third and fourth conditional cumulants of one transition.
fn increment_cumulants(tr: Transition, rates: Rates) -> Result<(f64, f64)> {
    let var = cgf_eval(0.0, tr.tau, 1, rates)?.k2;
    let sd = var.sqrt();
    let h = (1e-3 / sd).min(0.1 * max_cgf_arg(tr.tau, rates)?);
    let k2p = cgf_eval(h, tr.tau, 1, rates)?.k2;
    let k2m = cgf_eval(-h, tr.tau, 1, rates)?.k2;
    let k3 = (k2p - k2m) / (2.0 * h);
    let k4 = (k2p - 2.0 * var + k2m) / (h * h);
    let k = tr.start as f64;
    Ok((k3 / (k.sqrt() * var.powf(1.5)), k4 / (k * var * var)))
}

/// Plug-in covariance of the score in `(xi, omega)` coordinates.
pub fn qg_score_covariance(panel: &Panel, params: QgParams, mode: CumulantMode) -> Result<Cov2> {
    if mode == CumulantMode::Gaussian {
        return qg_information(panel, params);
    }
    let params = QgParams::new(params.omega, params.xi)?;
    let rates = params.rates()?;
    let xi = params.xi;
    let mut c = [[0.0; 2]; 2];
    for tr in panel.live_transitions() {
        let t = term(tr, params.omega);
        let (k3, k4) = increment_cumulants(tr, rates)?;
        let rr = t.dln_nu;
        // zeta_dot sqrt(k / (xi nu))
        let drift = (t.tau.ln() + t.u + 0.5 * (t.start.ln() - xi.ln() - t.ln_nu)).exp();
        c[0][0] += (2.0 + k4) / (4.0 * xi * xi);
        c[0][1] += (rr * (2.0 + k4) + 2.0 * drift * k3) / (4.0 * xi);
        c[1][1] += 0.25 * rr * rr * (2.0 + k4) + drift * drift + rr * drift * k3;
    }
    c[1][0] = c[0][1];
    Ok(c)
}

fn inverse(m: Cov2) -> Result<Cov2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = (m[0][0] * m[1][1]).abs().max(m[0][1].abs() * m[1][0].abs());
    if !(det.abs() > 1e-14 * scale) || !det.is_finite() {
        return Err(Error::Degenerate("information matrix is singular".into()));
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn mul(a: Cov2, b: Cov2) -> Cov2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Sandwich covariance of `(lambda_hat, mu_hat)` with Gaussian cumulants.
pub fn qg_sandwich_cov(panel: &Panel, params: QgParams) -> Result<Cov2> {
    qg_sandwich_cov_with(panel, params, CumulantMode::Gaussian)
}

pub fn qg_sandwich_cov_with(panel: &Panel, params: QgParams, mode: CumulantMode) -> Result<Cov2> {
    let info_inv = inverse(qg_information(panel, params)?)?;
    let c = qg_score_covariance(panel, params, mode)?;
    let v = mul(mul(info_inv, c), info_inv);
    let d = [[0.5, 0.5], [0.5, -0.5]];
    let mut out = mul(mul(d, v), d);
    let off = 0.5 * (out[0][1] + out[1][0]);
    out[0][1] = off;
    out[1][0] = off;
    Ok(out)
}
