//! Exact transition law of the linear birth-and-death process.
//!
//! All closed forms are written through the growth factor
//! `g(t) = (exp(omega t) - 1) / omega` (equal to `t` when `lambda = mu`):
//!
//! ```text
//! f(s, t)  = (mu g (s - 1) - s) / (lambda g (s - 1) - 1)
//! alpha(t) = mu g / (1 + lambda g)
//! beta(t)  = lambda g / (1 + lambda g)
//! ```
//!
//! so the critical branch is the `g = t` limit rather than a separate
//! formula and no cancellation occurs near `omega = 0`.

use crate::data::{Panel, Transition};
use crate::error::{domain, Error, Result};
use crate::rates::Rates;
use crate::special::{ln_binomial, xlogy, LogSumExp};

/// Tail mass below which infinite sums over `k` are truncated.
pub const TAIL_TOL: f64 = 1e-12;
/// Hard cap on any truncation point.
pub const K_MAX_CAP: u64 = 1_000_000;

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return domain(format!("time must be finite and nonnegative, got {t}"));
    }
    Ok(())
}

fn check_positive_time(t: f64) -> Result<()> {
    if !t.is_finite() || t <= 0.0 {
        return domain(format!("time must be finite and positive, got {t}"));
    }
    Ok(())
}

/// Probability generating function `f(s, t)` of `Z(t)` given `Z(0) = 1`.
///
/// Valid for `s` below the pole `R(t)`; see [`crate::saddlepoint::radius`].
pub fn pgf(s: f64, t: f64, rates: Rates) -> Result<f64> {
    check_time(t)?;
    if !s.is_finite() {
        return domain(format!("pgf argument must be finite, got {s}"));
    }
    if t == 0.0 {
        return Ok(s);
    }
    let g = rates.growth_factor(t);
    let d = s - 1.0;
    let den = rates.lambda() * g * d - 1.0;
    if den >= 0.0 {
        return domain(format!("pgf argument {s} is beyond the convergence radius"));
    }
    Ok((rates.mu() * g * d - s) / den)
}

/// Parameters `(alpha(t), beta(t))` of the modified geometric law of `Z(t)` given `Z(0) = 1`.
pub fn alpha_beta(t: f64, rates: Rates) -> Result<(f64, f64)> {
    check_positive_time(t)?;
    let g = rates.growth_factor(t);
    let den = 1.0 + rates.lambda() * g;
    Ok((rates.mu() * g / den, rates.lambda() * g / den))
}

/// Logarithms of `alpha`, `beta`, `1 - alpha`, `1 - beta`, computed without subtraction.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogParams {
    pub ln_alpha: f64,
    pub ln_beta: f64,
    pub ln_1m_alpha: f64,
    pub ln_1m_beta: f64,
}

impl LogParams {
    pub(crate) fn new(t: f64, rates: Rates) -> Self {
        let g = rates.growth_factor(t);
        let ln_den = (rates.lambda() * g).ln_1p();
        Self {
            ln_alpha: (rates.mu() * g).ln() - ln_den,
            ln_beta: (rates.lambda() * g).ln() - ln_den,
            // 1 - alpha = exp(omega t) / (1 + lambda g)
            ln_1m_alpha: rates.omega() * t - ln_den,
            ln_1m_beta: -ln_den,
        }
    }
}

/// `log P(Z(t) = k | Z(0) = a)`.
///
/// `a = 0` is the absorbing state: a point mass at `k = 0`.
pub fn log_transition_prob(k: u64, t: f64, a: u64, rates: Rates) -> Result<f64> {
    check_positive_time(t)?;
    Ok(log_transition_prob_with(k, a, &LogParams::new(t, rates)))
}

pub(crate) fn log_transition_prob_with(k: u64, a: u64, lp: &LogParams) -> f64 {
    if a == 0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if k == 0 {
        return xlogy(a as f64, lp.ln_alpha);
    }
    let ln_survive = lp.ln_1m_alpha + lp.ln_1m_beta;
    let mut acc = LogSumExp::default();
    // j ancestors go extinct; the other a - j founders produce k individuals.
    for j in a.saturating_sub(k)..a {
        let term = ln_binomial(a, j)
            + ln_binomial(k - 1, a - j - 1)
            + xlogy(j as f64, lp.ln_alpha)
            + (a - j) as f64 * ln_survive
            + xlogy((k + j - a) as f64, lp.ln_beta);
        acc.push(term);
    }
    acc.value()
}

/// `E[Z(t) | Z(0) = a] = a exp(omega t)`.
pub fn mean(t: f64, a: u64, rates: Rates) -> Result<f64> {
    check_time(t)?;
    Ok(a as f64 * (rates.omega() * t).exp())
}

/// `Var[Z(t) | Z(0) = a]`; equals `2 a lambda t` on the critical branch.
pub fn variance(t: f64, a: u64, rates: Rates) -> Result<f64> {
    check_time(t)?;
    let m = (rates.omega() * t).exp();
    Ok(a as f64 * rates.xi() * m * rates.growth_factor(t))
}

/// Probability that the lineage of a single individual eventually dies out.
pub fn extinction_prob(rates: Rates) -> f64 {
    if rates.lambda() <= 0.0 {
        1.0
    } else {
        (rates.mu() / rates.lambda()).min(1.0)
    }
}

/// Truncation point for sums over the law of `Z(t)` given `Z(0) = a`.
///
/// `Z(t)` is stochastically dominated by a negative binomial with `a`
/// successes and failure probability `beta(t)`; once the ratio of
/// consecutive dominating terms falls below one, the remaining tail is
/// bounded by a geometric series. Returns the smallest `K` whose tail
/// bound is below [`TAIL_TOL`], capped at [`K_MAX_CAP`].
pub fn support_limit(t: f64, a: u64, rates: Rates) -> Result<u64> {
    check_positive_time(t)?;
    if a == 0 {
        return Ok(0);
    }
    let (_, beta) = alpha_beta(t, rates)?;
    if beta == 0.0 {
        return Ok(a);
    }
    let lp = LogParams::new(t, rates);
    let a_f = a as f64;
    // log of the dominating term at k: C(k-1, a-1) (1-beta)^a beta^(k-a)
    let mut k = a;
    let mut ln_term = a_f * lp.ln_1m_beta;
    loop {
        let ratio = beta * k as f64 / (k + 1 - a) as f64;
        if ratio < 1.0 {
            let ln_tail = ln_term + ratio.ln() - (1.0 - ratio).ln();
            if ln_tail < TAIL_TOL.ln() {
                return Ok(k);
            }
        }
        if k >= K_MAX_CAP {
            return Ok(K_MAX_CAP);
        }
        ln_term += ratio.ln();
        k += 1;
    }
}

/// Exact pmf `p_k(t; a)` for `k = 0..=k_max`.
pub fn transition_pmf(t: f64, a: u64, rates: Rates, k_max: u64) -> Result<Vec<f64>> {
    check_positive_time(t)?;
    let lp = LogParams::new(t, rates);
    Ok((0..=k_max)
        .map(|k| log_transition_prob_with(k, a, &lp).exp())
        .collect())
}

/// Log-likelihood of one transition; `0 -> 0` contributes zero.
pub fn transition_loglik(tr: Transition, rates: Rates) -> Result<f64> {
    log_transition_prob(tr.end, tr.tau, tr.start, rates)
}

/// Exact log-likelihood of a panel by the Markov decomposition.
pub fn exact_loglik(panel: &Panel, rates: Rates) -> Result<f64> {
    let mut total = 0.0;
    for tr in panel.transitions() {
        if tr.start == 0 {
            continue;
        }
        total += transition_loglik(tr, rates)?;
    }
    if total.is_nan() {
        return Err(Error::Domain("log-likelihood evaluated to NaN".into()));
    }
    Ok(total)
}
