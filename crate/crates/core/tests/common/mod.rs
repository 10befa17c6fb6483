#![allow(dead_code)]

use lbdp::benchmark::{simulate_replicate, Cell, GapLaw};
use lbdp::{Panel, Rates};

pub fn cell(lambda: f64, mu: f64, z0: u64, n: usize, m: usize, gaps: GapLaw) -> Cell {
    Cell {
        rates: Rates::new(lambda, mu).unwrap(),
        z0,
        n_transitions: n,
        m,
        gaps,
        condition_nonextinct: true,
    }
}

pub fn equal(dt: f64) -> GapLaw {
    GapLaw::Equal { dt }
}

pub fn uniform(lo: f64, hi: f64) -> GapLaw {
    GapLaw::Uniform { lo, hi }
}

/// Replicate panels `0..n` of a cell under `seed`.
pub fn panels(c: &Cell, seed: u64, n: usize) -> Vec<Panel> {
    (0..n as u64).map(|i| simulate_replicate(c, seed, i).unwrap()).collect()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

/// Final counts of `n` independent paths observed once at `t`, and the total rejections.
pub fn final_counts(rates: Rates, z0: u64, t: f64, n: usize, seed: u64, conditioned: bool) -> (Vec<u64>, u64) {
    use lbdp::simulate::{replicate_rng, simulate_with, SimConfig};
    let cfg = SimConfig::new(rates, z0, vec![t], seed).conditioned(conditioned);
    let mut rng = replicate_rng(seed, 0);
    let mut rejections = 0;
    let counts = (0..n)
        .map(|_| {
            let out = simulate_with(&cfg, &mut rng).unwrap();
            rejections += out.rejections;
            *out.trajectory.counts().last().unwrap()
        })
        .collect();
    (counts, rejections)
}

/// Total variation between the empirical law of `counts` and `pmf`; mass beyond `pmf` counts fully.
pub fn total_variation(counts: &[u64], pmf: &[f64]) -> f64 {
    let mut freq = vec![0.0; pmf.len()];
    let mut outside = 0.0;
    let w = 1.0 / counts.len() as f64;
    for &k in counts {
        match freq.get_mut(k as usize) {
            Some(f) => *f += w,
            None => outside += w,
        }
    }
    let inside: f64 = freq.iter().zip(pmf).map(|(f, p)| (f - p).abs()).sum();
    let tail = (1.0 - pmf.iter().sum::<f64>()).max(0.0);
    0.5 * (inside + (outside - tail).abs())
}
