//! Embedded Galton–Watson estimators for equally spaced observations.

use serde::{Deserialize, Serialize};

use crate::data::{Panel, SPACING_TOL};
use crate::error::{domain, Error, Result};
use crate::rates::Rates;

/// Threshold on `|m - 1|` below which the critical inversion is used.
pub const EPS_M: f64 = 1e-6;

/// Offspring mean and variance of the embedded Galton–Watson process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GwMoments {
    pub m_hat: f64,
    pub sigma2_hat: f64,
    pub delta_t: f64,
    /// Number of transitions up to and including the first extinction.
    pub n_terms: usize,
    pub m_traj: usize,
    /// `sum Z_{j-1}` over the same transitions.
    pub sum_prev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SupercriticalOk,
    NearCriticalWarning,
}

/// Rates recovered from offspring moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GwInversion {
    pub rates: Rates,
    /// A negative rate was clamped to zero.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GwEstimate {
    pub moments: GwMoments,
    pub rates: Rates,
    pub omega_hat: f64,
    pub se_lambda: f64,
    pub se_mu: f64,
    pub se_omega: f64,
    pub regime: Regime,
    pub clamped: bool,
}

/// Offspring mean and variance pooled over all trajectories.
///
/// Extinct segments use `0/0 := 1`, so they carry zero weight; only
/// transitions up to the first zero are counted in `n_terms`.
pub fn gw_moments(panel: &Panel) -> Result<GwMoments> {
    let delta_t = panel.common_spacing(SPACING_TOL).ok_or_else(|| {
        Error::Precondition(
            "GW estimation needs equally spaced observations; use the quasi-Gaussian \
             estimator (qg) for unequal gaps"
                .into(),
        )
    })?;
    let mut sum_next = 0.0;
    let mut sum_prev = 0.0;
    let mut n_terms = 0usize;
    for tr in panel.live_transitions() {
        sum_next += tr.end as f64;
        sum_prev += tr.start as f64;
        n_terms += 1;
    }
    if n_terms == 0 || sum_prev == 0.0 {
        return Err(Error::Degenerate("no transition out of a positive count".into()));
    }
    if sum_next == 0.0 {
        return Err(Error::Degenerate(
            "every trajectory went extinct after one step; offspring mean is zero".into(),
        ));
    }
    let m_hat = sum_next / sum_prev;
    let ss: f64 = panel
        .live_transitions()
        .map(|tr| {
            let z = tr.start as f64;
            let dev = tr.end as f64 / z - m_hat;
            z * dev * dev
        })
        .sum();
    Ok(GwMoments {
        m_hat,
        sigma2_hat: ss / n_terms as f64,
        delta_t,
        n_terms,
        m_traj: panel.n_trajectories(),
        sum_prev,
    })
}

/// Maps offspring moments to birth and death rates.
pub fn gw_invert(moments: &GwMoments) -> Result<GwInversion> {
    let m = moments.m_hat;
    let s2 = moments.sigma2_hat;
    let dt = moments.delta_t;
    if !(m > 0.0) || !m.is_finite() {
        return domain(format!("offspring mean must be positive, got {m}"));
    }
    if !(dt > 0.0) {
        return domain(format!("spacing must be positive, got {dt}"));
    }
    let (lambda, mu) = if (m - 1.0).abs() <= EPS_M {
        let r = s2 / (2.0 * dt);
        (r, r)
    } else {
        let c = m.ln() / (2.0 * dt);
        let ratio = s2 / (m * (m - 1.0));
        (c * (ratio + 1.0), c * (ratio - 1.0))
    };
    let clamped = lambda < 0.0 || mu < 0.0;
    let rates = Rates::new(lambda.max(0.0), mu.max(0.0)).map_err(|_| {
        Error::Degenerate(format!(
            "offspring moments (m = {m}, sigma2 = {s2}) give no admissible rates"
        ))
    })?;
    Ok(GwInversion { rates, clamped })
}

/// `log(m) / (m - 1)`, continuous at `m = 1`.
fn log_ratio(m: f64) -> f64 {
    let d = m - 1.0;
    if d.abs() < 1e-8 {
        1.0 - d / 2.0
    } else {
        d.ln_1p() / d
    }
}

/// Plug-in asymptotic standard errors `(se_lambda, se_mu, se_omega)` and regime flag.
///
/// `se_lambda = se_mu` is the square root of the common diagonal entry of the
/// rank-one limiting covariance with `sqrt(n_terms)` scaling; `se_omega`
/// uses the `sum Z_{j-1}` normalisation.
pub fn gw_standard_errors(moments: &GwMoments) -> (f64, f64, f64, Regime) {
    let m = moments.m_hat;
    let s2 = moments.sigma2_hat;
    let dt = moments.delta_t;
    let n = moments.n_terms as f64;
    // |log m| sigma^2 / sqrt(2 dt^2 m^2 (m-1)^2 n)
    let se_rate = log_ratio(m).abs() * s2 / (2f64.sqrt() * dt * m * n.sqrt());
    let se_omega = s2.sqrt() / (m * dt * moments.sum_prev.sqrt());
    let regime = if m > 1.0 + EPS_M {
        Regime::SupercriticalOk
    } else {
        Regime::NearCriticalWarning
    };
    (se_rate, se_rate, se_omega, regime)
}

pub fn gw_estimate(panel: &Panel) -> Result<GwEstimate> {
    let moments = gw_moments(panel)?;
    let inv = gw_invert(&moments)?;
    let (se_lambda, se_mu, se_omega, regime) = gw_standard_errors(&moments);
    Ok(GwEstimate {
        moments,
        rates: inv.rates,
        omega_hat: moments.m_hat.ln() / moments.delta_t,
        se_lambda,
        se_mu,
        se_omega,
        regime,
        clamped: inv.clamped,
    })
}
