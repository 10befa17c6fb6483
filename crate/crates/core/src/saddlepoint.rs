//! Saddlepoint approximation of the transition law.
//!
//! With `d = s - 1` and the growth factor `g`, the single-ancestor PGF is
//! `f(s) = num(s) / den(s)` with `num = mu g d - s` and `den = lambda g d - 1`.
//! Both factors are negative on `(0, R(t))`, and the derivatives of
//! `K(x) = a log f(e^x)` reduce to
//!
//! ```text
//! K'(x)  = a m s / P(s)
//! K''(x) = a m s (C2 - A2 s^2) / P(s)^2,   P = num * den = A2 s^2 + B2 s + C2
//! ```
//!
//! so the saddlepoint equation `K'(x) = k` is the quadratic
//! `A2 s^2 + (B2 - m a / k) s + C2 = 0`, whose unique root in `(0, R(t))`
//! is the saddlepoint.

use std::f64::consts::PI;

use crate::data::Panel;
use crate::error::{domain, Error, Result};
use crate::process::{self, support_limit, LogParams};
use crate::rates::Rates;
use crate::special::ln_expm1;

/// Relative width of the guard band below `log R(t)`.
const LOG_R_GUARD: f64 = 1e-12;

/// Which saddlepoint approximation to use in a log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaVariant {
    Plain,
    /// Saddlepoint of the CGF conditioned on non-extinction.
    Conditional,
}

/// The CGF of `Z(t)` given `Z(0) = a` and its first two derivatives at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgfPoint {
    pub x: f64,
    pub k: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Solution of `K'(x) = k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddlepointSolution {
    pub s_tilde: f64,
    pub x_tilde: f64,
    pub cgf: CgfPoint,
    pub target_k: u64,
    pub a: u64,
    pub t: f64,
}

/// Coefficients of `P(s) = num(s) den(s)` for one ancestor.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Quadratic {
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    /// `m(t) = exp(omega t)`
    pub m: f64,
    pub lg: f64,
    pub mg: f64,
}

impl Quadratic {
    pub(crate) fn new(t: f64, rates: Rates) -> Self {
        let g = rates.growth_factor(t);
        let lg = rates.lambda() * g;
        let mg = rates.mu() * g;
        let c1 = mg - 1.0;
        Self {
            a2: c1 * lg,
            b2: -(c1 * (1.0 + lg) + mg * lg),
            c2: mg * (1.0 + lg),
            m: (rates.omega() * t).exp(),
            lg,
            mg,
        }
    }

    #[inline]
    fn num(&self, s: f64) -> f64 {
        self.mg * (s - 1.0) - s
    }

    #[inline]
    fn den(&self, s: f64) -> f64 {
        self.lg * (s - 1.0) - 1.0
    }
}

/// Per-ancestor CGF pieces at `s = e^x`: `(log f, K', K'')`.
#[inline]
pub(crate) fn unit_cgf(q: &Quadratic, s: f64) -> (f64, f64, f64) {
    let num = q.num(s);
    let den = q.den(s);
    let p = num * den;
    let log_f = (-num).ln() - (-den).ln();
    let k1 = q.m * s / p;
    let k2 = q.m * s * (q.c2 - q.a2 * s * s) / (p * p);
    (log_f, k1, k2)
}

/// Convergence radius `R(t)` of the PGF in `s`; infinite when `lambda = 0`.
pub fn radius(t: f64, rates: Rates) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return domain(format!("time must be positive, got {t}"));
    }
    if rates.lambda() == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 + 1.0 / (rates.lambda() * rates.growth_factor(t)))
}

/// Largest admissible CGF argument: `log R(t)` minus the guard band.
pub fn max_cgf_arg(t: f64, rates: Rates) -> Result<f64> {
    let log_r = radius(t, rates)?.ln();
    Ok(log_r - LOG_R_GUARD * log_r.abs())
}

/// Evaluates `K(x, t; a)`, `K'` and `K''`.
pub fn cgf_eval(x: f64, t: f64, a: u64, rates: Rates) -> Result<CgfPoint> {
    if !x.is_finite() {
        return domain(format!("CGF argument must be finite, got {x}"));
    }
    if x > max_cgf_arg(t, rates)? {
        return domain(format!("CGF argument {x} outside the convergence set"));
    }
    let q = Quadratic::new(t, rates);
    let (log_f, k1, k2) = unit_cgf(&q, x.exp());
    let a = a as f64;
    Ok(CgfPoint {
        x,
        k: a * log_f,
        k1: a * k1,
        k2: a * k2,
    })
}

/// Root of `A s^2 + B s + C` in `(0, upper)`, using the cancellation-free pair.
fn quadratic_root_in(a: f64, b: f64, c: f64, upper: f64) -> Option<f64> {
    let inside = |s: f64| s > 0.0 && s < upper && s.is_finite();
    if a == 0.0 {
        let s = -c / b;
        return inside(s).then_some(s);
    }
    let disc = b * b - 4.0 * a * c;
    let scale = b * b + (4.0 * a * c).abs();
    if disc < -1e-12 * scale {
        return None;
    }
    let sq = disc.max(0.0).sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let r1 = q / a;
    let r2 = if q != 0.0 { c / q } else { f64::NAN };
    match (inside(r1), inside(r2)) {
        (true, false) => Some(r1),
        (false, true) => Some(r2),
        // both inside only through rounding at a double root
        (true, true) => Some(0.5 * (r1 + r2)),
        (false, false) => None,
    }
}

/// Solves `K'(x) = k` through the explicit quadratic root.
pub fn solve_saddlepoint(k: u64, t: f64, a: u64, rates: Rates) -> Result<SaddlepointSolution> {
    if k == 0 || a == 0 {
        return domain("saddlepoint requires k >= 1 and a >= 1");
    }
    let r = radius(t, rates)?;
    let q = Quadratic::new(t, rates);
    let ratio = a as f64 / k as f64;
    let b = q.b2 - ratio * q.m;
    let s = quadratic_root_in(q.a2, b, q.c2, r).ok_or_else(|| {
        Error::Solver(format!(
            "no saddlepoint in (0, R) for k = {k}, a = {a}, t = {t}, rates = {rates:?}"
        ))
    })?;
    let mut x = s.ln();
    let af = a as f64;
    let kf = k as f64;
    let eval = |x: f64| {
        let (log_f, k1, k2) = unit_cgf(&q, x.exp());
        CgfPoint {
            x,
            k: af * log_f,
            k1: af * k1,
            k2: af * k2,
        }
    };
    let mut cgf = eval(x);
    // one or two Newton polishes remove rounding left by the closed form
    for _ in 0..3 {
        let resid = cgf.k1 - kf;
        if resid.abs() <= 1e-11 * kf.max(1.0) || !(cgf.k2 > 0.0) {
            break;
        }
        let next = x - resid / cgf.k2;
        if next.is_finite() && next < r.ln() {
            x = next;
            cgf = eval(x);
        } else {
            break;
        }
    }
    if !(cgf.k2 > 0.0) || !cgf.k.is_finite() {
        return Err(Error::Solver(format!(
            "degenerate saddlepoint for k = {k}, a = {a}, t = {t}"
        )));
    }
    Ok(SaddlepointSolution {
        s_tilde: x.exp(),
        x_tilde: x,
        cgf,
        target_k: k,
        a,
        t,
    })
}

fn spa_log_from(cgf: &CgfPoint, k: u64) -> f64 {
    cgf.k - cgf.x * k as f64 - 0.5 * (2.0 * PI * cgf.k2).ln()
}

/// `log` of the first-order saddlepoint approximation; exact at `k = 0`.
pub fn spa_log_pmf(k: u64, t: f64, a: u64, rates: Rates) -> Result<f64> {
    if a == 0 {
        return Ok(if k == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if k == 0 {
        return process::log_transition_prob(0, t, a, rates);
    }
    let sol = solve_saddlepoint(k, t, a, rates)?;
    Ok(spa_log_from(&sol.cgf, k))
}

pub fn spa_pmf(k: u64, t: f64, a: u64, rates: Rates) -> Result<f64> {
    Ok(spa_log_pmf(k, t, a, rates)?.exp())
}

/// Normalised approximation for `k = 0..=k_max`, with the normalising
/// constant taken over `1..=K` where `K` is the support limit.
pub fn spa_pmf_normalized_table(t: f64, a: u64, rates: Rates, k_max: u64) -> Result<Vec<f64>> {
    let limit = support_limit(t, a, rates)?.max(k_max);
    let p0 = process::log_transition_prob(0, t, a, rates)?.exp();
    let mut raw = Vec::with_capacity(limit as usize);
    for k in 1..=limit {
        raw.push(spa_pmf(k, t, a, rates)?);
    }
    let total: f64 = raw.iter().sum();
    let mut out = Vec::with_capacity(k_max as usize + 1);
    out.push(p0);
    out.extend(raw.iter().take(k_max as usize).map(|p| (1.0 - p0) * p / total));
    Ok(out)
}

/// Normalised saddlepoint approximation at a single `k`.
pub fn spa_pmf_normalized(k: u64, t: f64, a: u64, rates: Rates) -> Result<f64> {
    if k == 0 {
        return Ok(process::log_transition_prob(0, t, a, rates)?.exp());
    }
    let table = spa_pmf_normalized_table(t, a, rates, k)?;
    Ok(table[k as usize])
}

/// CGF of `Z(t)` conditioned on `Z(t) > 0`.
#[derive(Debug, Clone, Copy)]
struct ConditionalCgf {
    q: Quadratic,
    a: f64,
    ln_alpha: f64,
    /// `log(1 - alpha^a)`
    ln_survive: f64,
}

impl ConditionalCgf {
    fn new(t: f64, a: u64, rates: Rates) -> Self {
        let lp = LogParams::new(t, rates);
        let af = a as f64;
        let ln_p0 = if rates.mu() == 0.0 { f64::NEG_INFINITY } else { af * lp.ln_alpha };
        Self {
            q: Quadratic::new(t, rates),
            a: af,
            ln_alpha: lp.ln_alpha,
            ln_survive: (-ln_p0.exp_m1()).ln(),
        }
    }

    fn eval(&self, x: f64) -> CgfPoint {
        let (log_f, k1u, k2u) = unit_cgf(&self.q, x.exp());
        let k1 = self.a * k1u;
        let k2 = self.a * k2u;
        if self.ln_alpha == f64::NEG_INFINITY {
            return CgfPoint { x, k: self.a * log_f, k1, k2 };
        }
        // M - p0 = alpha^a expm1(L),  L = a (log f - log alpha)
        let l = self.a * (log_f - self.ln_alpha);
        let ln_m_minus_p0 = self.a * self.ln_alpha + ln_expm1(l);
        let r = 1.0 / (-(-l).exp_m1());
        CgfPoint {
            x,
            k: ln_m_minus_p0 - self.ln_survive,
            k1: k1 * r,
            k2: k2 * r - k1 * k1 * r * (r - 1.0),
        }
    }
}

/// Solves the conditional saddlepoint equation by safeguarded Newton,
/// seeded at the plain saddlepoint.
fn solve_conditional(k: u64, t: f64, a: u64, rates: Rates) -> Result<CgfPoint> {
    let cc = ConditionalCgf::new(t, a, rates);
    let kf = k as f64;
    let x_hi_limit = radius(t, rates)?.ln() - 1e-8;
    let seed = solve_saddlepoint(k, t, a, rates)?.x_tilde;
    let h = |x: f64| cc.eval(x).k1 - kf;

    let mut lo = seed - 5.0;
    let mut tries = 0;
    while !(h(lo) < 0.0) {
        lo -= 5.0;
        tries += 1;
        if tries > 20 {
            return Err(Error::Solver(format!(
                "conditional saddlepoint: cannot bracket from below (k = {k}, a = {a}, t = {t})"
            )));
        }
    }
    let mut hi = if x_hi_limit.is_finite() { x_hi_limit } else { seed + 50.0 };
    if !(h(hi) > 0.0) {
        return Err(Error::Solver(format!(
            "conditional saddlepoint: cannot bracket from above (k = {k}, a = {a}, t = {t})"
        )));
    }
    let mut x = seed.clamp(lo, hi);
    for _ in 0..200 {
        let p = cc.eval(x);
        let f = p.k1 - kf;
        if f.abs() <= 1e-10 * kf.max(1.0) {
            return Ok(p);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - f / p.k2;
        x = if p.k2 > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * (1.0 + x.abs()) {
            return Ok(cc.eval(x));
        }
    }
    Err(Error::Solver(format!(
        "conditional saddlepoint did not converge (k = {k}, a = {a}, t = {t})"
    )))
}

/// `log` of the conditional ("adjusted") saddlepoint approximation,
/// rescaled by `1 - p_0` so it approximates the unconditional `p_k`.
///
/// At `k = 1`, the lower edge of the conditional support, the saddlepoint
/// does not exist and the exact edge probability `a alpha^(a-1) (1-alpha)(1-beta)`
/// is returned.
pub fn spa_log_pmf_conditional(k: u64, t: f64, a: u64, rates: Rates) -> Result<f64> {
    if a == 0 || k <= 1 {
        return process::log_transition_prob(k, t, a, rates);
    }
    let cc = ConditionalCgf::new(t, a, rates);
    let p = solve_conditional(k, t, a, rates)?;
    Ok(spa_log_from(&p, k) + cc.ln_survive)
}

pub fn spa_pmf_conditional(k: u64, t: f64, a: u64, rates: Rates) -> Result<f64> {
    Ok(spa_log_pmf_conditional(k, t, a, rates)?.exp())
}

/// Saddlepoint log-likelihood of a panel. Extinctions use the exact
/// `a log alpha`; transitions out of 0 contribute nothing.
pub fn spa_loglik(panel: &Panel, rates: Rates, variant: SpaVariant) -> Result<f64> {
    let mut total = 0.0;
    for tr in panel.transitions() {
        if tr.start == 0 {
            continue;
        }
        total += match variant {
            SpaVariant::Plain => spa_log_pmf(tr.end, tr.tau, tr.start, rates)?,
            SpaVariant::Conditional => spa_log_pmf_conditional(tr.end, tr.tau, tr.start, rates)?,
        };
    }
    if total.is_nan() {
        return Err(Error::Domain("saddlepoint log-likelihood evaluated to NaN".into()));
    }
    Ok(total)
}
