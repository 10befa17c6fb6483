//! Joint saddlepoint approximation for a whole observed path.
//!
//! The joint PGF of `(Z(t_1), ..., Z(t_N))` given `Z(t_0) = a` is the nested
//! composition `f(s_1 f(s_2 ... f(s_N, tau_N) ..., tau_2), tau_1)^a`. On the
//! log scale, with `L_{N+1} = 0`, `y_j = x_j + L_{j+1}` and
//! `L_j = log f(exp(y_j), tau_j)`, the joint CGF is `K(x) = a L_1`. Gradient
//! and Hessian are carried through the recursion by the chain rule.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::data::{Panel, Trajectory};
use crate::error::{domain, Error, Result};
use crate::process;
use crate::rates::Rates;
use crate::saddlepoint::{max_cgf_arg, solve_saddlepoint, unit_cgf, Quadratic};

pub const MAX_NEWTON_ITERS: usize = 100;
pub const MAX_HALVINGS: usize = 30;
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Joint CGF value, gradient and Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct MvCgf {
    pub k: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// Solution of `K'(x) = k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MvSaddle {
    pub x_tilde: DVector<f64>,
    pub k: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn check_gaps(gaps: &[f64]) -> Result<()> {
    if gaps.is_empty() {
        return domain("at least one observation gap is required");
    }
    if let Some(g) = gaps.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return domain(format!("observation gaps must be positive, got {g}"));
    }
    Ok(())
}

/// Joint PGF at `s`, evaluated from the innermost gap outward.
pub fn joint_pgf(s: &[f64], gaps: &[f64], a: u64, rates: Rates) -> Result<f64> {
    check_gaps(gaps)?;
    if s.len() != gaps.len() {
        return domain(format!("{} arguments for {} gaps", s.len(), gaps.len()));
    }
    let mut inner = 1.0;
    for j in (0..gaps.len()).rev() {
        inner = process::pgf(s[j] * inner, gaps[j], rates).map_err(|e| {
            Error::Domain(format!("nesting level {}: {e}", j + 1))
        })?;
    }
    Ok(inner.powf(a as f64))
}

/// Joint CGF `K(x)` with its gradient and Hessian.
pub fn mv_cgf(x: &[f64], gaps: &[f64], a: u64, rates: Rates) -> Result<MvCgf> {
    check_gaps(gaps)?;
    let n = gaps.len();
    if x.len() != n {
        return domain(format!("{} arguments for {} gaps", x.len(), n));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return domain(format!("CGF argument must be finite, got {v}"));
    }
    let mut l = 0.0;
    let mut dl = DVector::<f64>::zeros(n);
    let mut hl = DMatrix::<f64>::zeros(n, n);
    for j in (0..n).rev() {
        let y = x[j] + l;
        if y > max_cgf_arg(gaps[j], rates)? {
            return domain(format!("nesting level {}: argument {y} outside the convergence set", j + 1));
        }
        let q = Quadratic::new(gaps[j], rates);
        let (log_f, k1, k2) = unit_cgf(&q, y.exp());
        let mut dy = dl.clone();
        dy[j] += 1.0;
        hl *= k1;
        hl.ger(k2, &dy, &dy, 1.0);
        dl = dy * k1;
        l = log_f;
    }
    let af = a as f64;
    Ok(MvCgf {
        k: af * l,
        grad: dl * af,
        hess: hl * af,
    })
}

/// Starting point: each level's univariate transition saddlepoint, mapped
/// back through `x_j = y_j - L_{j+1}`.
fn initial_point(k: &[u64], gaps: &[f64], a: u64, rates: Rates) -> Result<Vec<f64>> {
    let n = gaps.len();
    let mut y = vec![0.0; n];
    let mut prev = a;
    for j in 0..n {
        y[j] = solve_saddlepoint(k[j], gaps[j], prev, rates)?.x_tilde;
        prev = k[j];
    }
    let mut x = vec![0.0; n];
    let mut l_next = 0.0;
    for j in (0..n).rev() {
        x[j] = y[j] - l_next;
        l_next = unit_cgf(&Quadratic::new(gaps[j], rates), y[j].exp()).0;
    }
    Ok(x)
}

/// Damped Newton solve of `K'(x) = k` for a positive count vector.
pub fn mv_solve(k: &[u64], gaps: &[f64], a: u64, rates: Rates) -> Result<MvSaddle> {
    check_gaps(gaps)?;
    if k.len() != gaps.len() {
        return domain(format!("{} counts for {} gaps", k.len(), gaps.len()));
    }
    if a == 0 || k.contains(&0) {
        return domain("joint saddlepoint needs a positive start and positive counts");
    }
    let target = DVector::from_iterator(k.len(), k.iter().map(|&v| v as f64));
    let tol = RESIDUAL_TOL * target.amax().max(1.0);
    let mut x = DVector::from_vec(initial_point(k, gaps, a, rates)?);
    let mut cgf = mv_cgf(x.as_slice(), gaps, a, rates)?;
    let mut resid = &cgf.grad - &target;
    let mut trace = Vec::new();
    for iter in 0..MAX_NEWTON_ITERS {
        if resid.amax() <= tol {
            return Ok(MvSaddle {
                x_tilde: x,
                k: cgf.k,
                grad: cgf.grad,
                hess: cgf.hess,
                residual_norm: resid.amax(),
                iterations: iter,
            });
        }
        trace.push(resid.amax());
        let chol = cgf
            .hess
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Solver("joint CGF Hessian is not positive definite".into()))?;
        let step = chol.solve(&resid);
        let norm0 = resid.norm();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = &x - &step * scale;
            if let Ok(c) = mv_cgf(trial.as_slice(), gaps, a, rates) {
                let r = &c.grad - &target;
                if r.norm() < norm0 {
                    accepted = Some((trial, c, r));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((nx, nc, nr)) = accepted else {
            return Err(Error::Solver(format!(
                "joint saddlepoint line search failed; residual trace {trace:?}"
            )));
        };
        x = nx;
        cgf = nc;
        resid = nr;
    }
    Err(Error::Solver(format!(
        "joint saddlepoint did not converge in {MAX_NEWTON_ITERS} iterations; residual trace {trace:?}"
    )))
}

/// Log of the joint saddlepoint approximation to `P(Z(t_1..t_N) = k | Z(t_0) = a)`.
///
/// Trailing zeros are factored out exactly: the positive prefix is
/// approximated and multiplied by `alpha(tau)^(k_last)` for the extinction step.
pub fn mv_spa_log_pmf(k: &[u64], gaps: &[f64], a: u64, rates: Rates) -> Result<f64> {
    check_gaps(gaps)?;
    if k.len() != gaps.len() {
        return domain(format!("{} counts for {} gaps", k.len(), gaps.len()));
    }
    if a == 0 {
        return Ok(if k.iter().all(|&v| v == 0) { 0.0 } else { f64::NEG_INFINITY });
    }
    let first_zero = k.iter().position(|&v| v == 0).unwrap_or(k.len());
    if k[first_zero..].iter().any(|&v| v != 0) {
        return Ok(f64::NEG_INFINITY);
    }
    let mut log_p = 0.0;
    if first_zero < k.len() {
        let parent = if first_zero == 0 { a } else { k[first_zero - 1] };
        log_p += process::log_transition_prob(0, gaps[first_zero], parent, rates)?;
    }
    if first_zero == 0 {
        return Ok(log_p);
    }
    let prefix = &k[..first_zero];
    let sol = mv_solve(prefix, &gaps[..first_zero], a, rates)?;
    let dim = prefix.len() as f64;
    let chol = sol
        .hess
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver("joint CGF Hessian is not positive definite".into()))?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let xk: f64 = sol
        .x_tilde
        .iter()
        .zip(prefix)
        .map(|(x, &v)| x * v as f64)
        .sum();
    Ok(log_p + sol.k - xk - 0.5 * dim * (2.0 * PI).ln() - 0.5 * log_det)
}

pub fn mv_spa_pmf(k: &[u64], gaps: &[f64], a: u64, rates: Rates) -> Result<f64> {
    Ok(mv_spa_log_pmf(k, gaps, a, rates)?.exp())
}

fn trajectory_log_pmf(tr: &Trajectory, rates: Rates) -> Result<f64> {
    let gaps: Vec<f64> = tr.gaps().collect();
    mv_spa_log_pmf(&tr.counts()[1..], &gaps, tr.counts()[0], rates)
}

/// Joint-saddlepoint log-likelihood: one joint term per trajectory.
pub fn mv_loglik(panel: &Panel, rates: Rates) -> Result<f64> {
    let mut total = 0.0;
    for (i, tr) in panel.trajectories().iter().enumerate() {
        total += trajectory_log_pmf(tr, rates)
            .map_err(|e| Error::Solver(format!("trajectory {i}: {e}")))?;
    }
    Ok(total)
}
