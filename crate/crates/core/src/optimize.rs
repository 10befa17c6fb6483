//! Thin wrappers over `argmin`: a restarted Nelder–Mead minimiser in two
//! dimensions and a bracketed Brent root finder.

use std::cell::Cell;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::brent::BrentRoot;
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    /// Relative objective change below which a restart counts as no progress.
    pub tol: f64,
    pub restarts: usize,
    pub max_iters: u64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            restarts: 3,
            max_iters: 2000,
            initial_step: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: [f64; 2],
    pub value: f64,
    pub converged: bool,
    pub n_evals: usize,
}

struct Counted<'a, F> {
    f: &'a F,
    evals: &'a Cell<usize>,
}

impl<F: Fn([f64; 2]) -> f64> CostFunction for Counted<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        self.evals.set(self.evals.get() + 1);
        let v = (self.f)([p[0], p[1]]);
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    }
}

fn nelder_mead<F: Fn([f64; 2]) -> f64>(
    f: &F,
    evals: &Cell<usize>,
    simplex: Vec<Vec<f64>>,
    sd_tol: f64,
    max_iters: u64,
) -> Option<([f64; 2], f64)> {
    let solver = NelderMead::new(simplex).with_sd_tolerance(sd_tol).ok()?;
    let res = Executor::new(Counted { f, evals }, solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .ok()?;
    let state = res.state();
    let p = state.get_best_param()?;
    Some(([p[0], p[1]], state.get_best_cost()))
}

/// Minimises `f` from `x0`. Non-finite objective values are treated as `+inf`.
///
/// After the first run the search is restarted `restarts` times from the best
/// point with a randomly rotated, shrinking simplex; the fit is reported as
/// converged when the last restart improves the objective by less than
/// `tol * (1 + |f|)`.
pub fn minimize_2d<F: Fn([f64; 2]) -> f64>(f: F, x0: [f64; 2], opts: &SimplexOptions) -> Minimum {
    let evals = Cell::new(0usize);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = x0;
    let mut best_f = {
        evals.set(1);
        let v = f(x0);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut step = opts.initial_step;
    let mut converged = false;
    for round in 0..=opts.restarts {
        let angle: f64 = if round == 0 {
            0.0
        } else {
            rng.random_range(0.0..std::f64::consts::TAU)
        };
        let simplex: Vec<Vec<f64>> = [0.0, angle, angle + std::f64::consts::FRAC_PI_2]
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if i == 0 {
                    best.to_vec()
                } else {
                    vec![best[0] + step * a.cos(), best[1] + step * a.sin()]
                }
            })
            .collect();
        let sd_tol = opts.tol * 1e-3 * (1.0 + best_f.abs().min(1e12));
        let Some((x, v)) = nelder_mead(&f, &evals, simplex, sd_tol, opts.max_iters) else {
            continue;
        };
        let improvement = best_f - v;
        if v < best_f {
            best = x;
            best_f = v;
        }
        converged = round > 0 && best_f.is_finite() && improvement <= opts.tol * (1.0 + best_f.abs());
        step = (step * 0.5).max(1e-3);
    }
    Minimum {
        x: best,
        value: best_f,
        converged,
        n_evals: evals.get(),
    }
}

struct Scalar<'a, F>(&'a F);

impl<F: Fn(f64) -> f64> CostFunction for Scalar<'_, F> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, x: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok((self.0)(*x))
    }
}

/// Root of `f` in `[lo, hi]`; the endpoints must have opposite signs.
pub fn brent_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, u64)> {
    let solver = BrentRoot::new(lo, hi, tol);
    let res = Executor::new(Scalar(&f), solver)
        .configure(|s| s.param(0.5 * (lo + hi)).max_iters(500))
        .run()
        .map_err(|e| Error::Solver(format!("root finder failed: {e}")))?;
    let state = res.state();
    let x = state
        .get_best_param()
        .copied()
        .ok_or_else(|| Error::Solver("root finder returned no point".into()))?;
    Ok((x, state.get_iter()))
}
