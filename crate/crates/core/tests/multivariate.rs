mod common;

use common::{cell, panels};
use lbdp::estimate::{fit, FitOptions, Method};
use lbdp::multivariate::{joint_pgf, mv_cgf, mv_solve, mv_spa_log_pmf};
use lbdp::optimize::{minimize_2d, SimplexOptions};
use lbdp::process::{log_transition_prob, mean, support_limit, transition_pmf, variance};
use lbdp::saddlepoint::{spa_log_pmf, SpaVariant};
use lbdp::{Panel, Rates, Trajectory};
use proptest::prelude::*;

/// Exact joint law of two observations by the Markov product.
fn lattice(gaps: [f64; 2], a: u64, r: Rates) -> Vec<Vec<f64>> {
    let k1_max = support_limit(gaps[0], a, r).unwrap();
    let first = transition_pmf(gaps[0], a, r, k1_max).unwrap();
    first
        .iter()
        .enumerate()
        .map(|(k1, p1)| {
            let k2_max = support_limit(gaps[1], k1 as u64, r).unwrap();
            transition_pmf(gaps[1], k1 as u64, r, k2_max).unwrap().iter().map(|p| p1 * p).collect()
        })
        .collect()
}

fn exact_joint(k: &[u64], gaps: &[f64], a: u64, r: Rates) -> f64 {
    let mut prev = a;
    let mut lp = 0.0;
    for (kj, g) in k.iter().zip(gaps) {
        lp += log_transition_prob(*kj, *g, prev, r).unwrap();
        prev = *kj;
    }
    lp
}

#[test]
fn lattice_marginalises_to_the_transition_law() {
    let r = Rates::new(1.5, 1.0).unwrap();
    let (gaps, a) = ([0.4, 0.3], 4);
    let joint = lattice(gaps, a, r);
    for (k1, row) in joint.iter().enumerate() {
        let p1 = log_transition_prob(k1 as u64, gaps[0], a, r).unwrap().exp();
        assert!((row.iter().sum::<f64>() - p1).abs() < 1e-6);
    }
}

#[test]
fn joint_pgf_matches_lattice() {
    let r = Rates::new(1.5, 1.0).unwrap();
    let (gaps, a) = ([0.4, 0.3], 4);
    let joint = lattice(gaps, a, r);
    for s in [[0.2f64, 0.9], [0.7, 0.5], [1.0, 1.0], [0.95, 0.3]] {
        let series: f64 = joint
            .iter()
            .enumerate()
            .flat_map(|(k1, row)| row.iter().enumerate().map(move |(k2, p)| p * s[0].powi(k1 as i32) * s[1].powi(k2 as i32)))
            .sum();
        assert!((series - joint_pgf(&s, &gaps, a, r).unwrap()).abs() < 1e-6, "{s:?}");
    }
}

#[test]
fn saddlepoint_minimises_the_exponent() {
    let r = Rates::new(2.0, 1.0).unwrap();
    let gaps = [0.5, 0.5];
    for k in [[9u64, 14], [5, 3], [20, 40]] {
        let sol = mv_solve(&k, &gaps, 6, r).unwrap();
        let exponent = |x: [f64; 2]| match mv_cgf(&x, &gaps, 6, r) {
            Ok(c) => c.k - x[0] * k[0] as f64 - x[1] * k[1] as f64,
            Err(_) => f64::INFINITY,
        };
        let mut best = [0.0, 0.0];
        let mut best_v = exponent(best);
        for i in -20..=20 {
            for j in -20..=20 {
                let x = [i as f64 * 0.05, j as f64 * 0.05];
                let v = exponent(x);
                if v < best_v {
                    best = x;
                    best_v = v;
                }
            }
        }
        let opts = SimplexOptions { tol: 1e-15, restarts: 5, initial_step: 0.05, ..SimplexOptions::default() };
        let polished = minimize_2d(exponent, best, &opts);
        for i in 0..2 {
            assert!((polished.x[i] - sol.x_tilde[i]).abs() < 1e-5, "{k:?}: {:?} vs {}", polished.x, sol.x_tilde);
        }
    }
}

fn central_max_error(a: u64, r: Rates, gaps: [f64; 2]) -> f64 {
    let (m1, s1) = (mean(gaps[0], a, r).unwrap(), variance(gaps[0], a, r).unwrap().sqrt());
    let mut worst = 0f64;
    for c1 in [-1.0, 0.0, 1.0] {
        let k1 = (m1 + c1 * s1).round().max(1.0) as u64;
        let (m2, s2) = (mean(gaps[1], k1, r).unwrap(), variance(gaps[1], k1, r).unwrap().sqrt());
        for c2 in [-1.0, 0.0, 1.0] {
            let k2 = (m2 + c2 * s2).round().max(1.0) as u64;
            let k = [k1, k2];
            let approx = mv_spa_log_pmf(&k, &gaps, a, r).unwrap();
            worst = worst.max(((approx - exact_joint(&k, &gaps, a, r)).exp() - 1.0).abs());
        }
    }
    worst
}

#[test]
fn joint_error_shrinks_with_the_initial_population() {
    let r = Rates::new(2.0, 1.0).unwrap();
    let gaps = [0.5, 0.5];
    let e5 = central_max_error(5, r, gaps);
    let e20 = central_max_error(20, r, gaps);
    assert!(e20 < e5, "{e5} -> {e20}");
    assert!(e5 < 0.1 && e20 < 0.04, "{e5}, {e20}");
}

#[test]
fn one_observation_reduces_to_the_univariate_approximation() {
    let r = Rates::new(7.0, 5.0).unwrap();
    for (k, a) in [(1u64, 3u64), (25, 10), (400, 300)] {
        let mv = mv_spa_log_pmf(&[k], &[0.3], a, r).unwrap();
        assert!((mv - spa_log_pmf(k, 0.3, a, r).unwrap()).abs() < 1e-9);
    }
    let single = Panel::new(
        (0..6)
            .map(|i| Trajectory::equally_spaced(0.2, vec![10 + i, 15 + 2 * i]).unwrap())
            .collect(),
    )
    .unwrap();
    let opts = FitOptions::default();
    let a = fit(&single, Method::MvSpmle, &opts).unwrap();
    let b = fit(&single, Method::Spmle, &opts).unwrap();
    assert!((a.rates.lambda() / b.rates.lambda() - 1.0).abs() < 1e-4);
    assert!((a.rates.mu() / b.rates.mu() - 1.0).abs() < 1e-4);
}

#[test]
fn joint_and_transition_fits_agree_on_large_counts() {
    let opts = FitOptions::default();
    for p in panels(&cell(7.0, 5.0, 200, 6, 2, common::equal(0.1)), 6, 2) {
        let mv = fit(&p, Method::MvSpmle, &opts).unwrap();
        let uni = fit(&p, Method::Spmle, &opts).unwrap();
        assert!((mv.rates.lambda() / uni.rates.lambda() - 1.0).abs() < 0.01);
        assert!((mv.rates.mu() / uni.rates.mu() - 1.0).abs() < 0.01);
    }
}

#[test]
fn growing_trajectory_relative_errors_are_close() {
    let tr = Trajectory::equally_spaced(1.0, vec![10, 10, 20, 33, 67, 80]).unwrap();
    let p = Panel::single(tr);
    let opts = FitOptions::default();
    let mle = fit(&p, Method::Mle, &opts).unwrap();
    let uni = fit(&p, Method::Spmle, &opts).unwrap();
    let multi = fit(&p, Method::MvSpmle, &opts).unwrap();
    let re = |f: &lbdp::estimate::EstimateResult| (f.rates.lambda() - mle.rates.lambda()).abs() / mle.rates.lambda();
    assert!((re(&multi) - re(&uni)).abs() <= 0.01, "uni {} multi {}", re(&uni), re(&multi));
}

#[test]
fn mv_loglik_is_finite_on_extinct_tails() {
    let p = Panel::single(Trajectory::equally_spaced(0.5, vec![8, 6, 3, 0, 0]).unwrap());
    let ll = lbdp::multivariate::mv_loglik(&p, Rates::new(1.0, 1.4).unwrap()).unwrap();
    assert!(ll.is_finite());
    let uni = lbdp::saddlepoint::spa_loglik(&p, Rates::new(1.0, 1.4).unwrap(), SpaVariant::Plain).unwrap();
    assert!((ll - uni).abs() < 1.0);
}

fn point(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-0.1f64..0.1, n), prop::collection::vec(0.1f64..0.8, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn derivatives_match_finite_differences(
        (x, gaps) in (1usize..=3).prop_flat_map(point),
        l in 0.3f64..3.0, m in 0.1f64..3.0, a in 1u64..20,
    ) {
        let r = Rates::new(l, m).unwrap();
        let n = x.len();
        let h = 1e-5;
        // stay inside the convergence set with room for the stencil
        let inside = mv_cgf(&x.iter().map(|v| v + 10.0 * h).collect::<Vec<_>>(), &gaps, a, r);
        prop_assume!(inside.is_ok());
        let c = mv_cgf(&x, &gaps, a, r).unwrap();
        // central differences with one Richardson step
        let diff = |i: usize, step: f64| {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += step;
            xm[i] -= step;
            let cp = mv_cgf(&xp, &gaps, a, r).unwrap();
            let cm = mv_cgf(&xm, &gaps, a, r).unwrap();
            let g = (cp.k - cm.k) / (2.0 * step);
            let hd: Vec<f64> = (0..n).map(|j| (cp.grad[j] - cm.grad[j]) / (2.0 * step)).collect();
            (g, hd)
        };
        for i in 0..n {
            let (g1, h1) = diff(i, h);
            let (g2, h2) = diff(i, h / 2.0);
            let g = (4.0 * g2 - g1) / 3.0;
            prop_assert!((g - c.grad[i]).abs() <= 1e-5 * c.grad[i].abs());
            for j in 0..n {
                let hd = (4.0 * h2[j] - h1[j]) / 3.0;
                prop_assert!((hd - c.hess[(i, j)]).abs() <= 1e-5 * c.hess[(i, i)].abs().max(c.hess[(j, j)].abs()));
            }
        }
    }

    #[test]
    fn solutions_meet_the_residual_and_are_positive_definite(
        k in prop::collection::vec(1u64..200, 1..=4), a in 1u64..100, l in 0.3f64..3.0, m in 0.1f64..3.0,
    ) {
        let r = Rates::new(l, m).unwrap();
        let gaps = vec![0.3; k.len()];
        let s = mv_solve(&k, &gaps, a, r).unwrap();
        let kmax = *k.iter().max().unwrap() as f64;
        prop_assert!(s.residual_norm <= 1e-8 * kmax.max(1.0));
        prop_assert!(s.hess.clone().cholesky().is_some());
    }

    #[test]
    fn trailing_zeros_factor(k1 in 1u64..30, k2 in 1u64..30, zeros in 1usize..3, a in 1u64..30) {
        let r = Rates::new(1.0, 1.4).unwrap();
        let mut k = vec![k1, k2];
        let prefix = mv_spa_log_pmf(&k, &[0.5, 0.5], a, r).unwrap();
        k.extend(std::iter::repeat_n(0, zeros));
        let gaps = vec![0.5; k.len()];
        let full = mv_spa_log_pmf(&k, &gaps, a, r).unwrap();
        let step = log_transition_prob(0, 0.5, k2, r).unwrap();
        prop_assert!((full - prefix - step).abs() < 1e-12 * full.abs().max(1.0));
    }
}
