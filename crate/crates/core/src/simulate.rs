//! Exact event-driven simulation of the birth-and-death process.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Panel, Trajectory};
use crate::error::{Error, Result};
use crate::rates::Rates;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rates: Rates,
    pub z0: u64,
    /// Observation times after time 0, strictly increasing.
    pub obs_times: Vec<f64>,
    /// Resample the whole path until the final observation is positive.
    pub condition_nonextinct: bool,
    pub seed: u64,
    pub max_events: u64,
    pub max_pop: u64,
    pub max_rejections: u64,
}

impl SimConfig {
    pub fn new(rates: Rates, z0: u64, obs_times: Vec<f64>, seed: u64) -> Self {
        Self {
            rates,
            z0,
            obs_times,
            condition_nonextinct: false,
            seed,
            max_events: 100_000_000,
            max_pop: 10_000_000,
            max_rejections: 1_000_000,
        }
    }

    /// Observation times `dt, 2 dt, ..., n dt`.
    pub fn equally_spaced(rates: Rates, z0: u64, dt: f64, n_obs: usize, seed: u64) -> Self {
        Self::new(rates, z0, (1..=n_obs).map(|j| j as f64 * dt).collect(), seed)
    }

    pub fn conditioned(mut self, on: bool) -> Self {
        self.condition_nonextinct = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.z0 == 0 {
            return Err(Error::Precondition("initial population must be positive".into()));
        }
        if self.obs_times.is_empty() {
            return Err(Error::Precondition("at least one observation time is required".into()));
        }
        let mut prev = 0.0;
        for &t in &self.obs_times {
            if !t.is_finite() || t <= prev {
                return Err(Error::Precondition(
                    "observation times must be finite, positive and strictly increasing".into(),
                ));
            }
            prev = t;
        }
        if self.max_events == 0 || self.max_pop == 0 {
            return Err(Error::Precondition("simulation caps must be positive".into()));
        }
        Ok(())
    }
}

/// A simulated path and the number of whole-path rejections it took.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub trajectory: Trajectory,
    pub rejections: u64,
    pub events: u64,
}

/// Random stream for replicate `index` of a master seed.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Counts at each observation time, without conditioning.
fn run_once<R: Rng>(cfg: &SimConfig, rng: &mut R) -> Result<(Vec<u64>, u64)> {
    let lambda = cfg.rates.lambda();
    let xi = cfg.rates.xi();
    let p_birth = lambda / xi;
    let n = cfg.obs_times.len();
    let mut counts = Vec::with_capacity(n + 1);
    counts.push(cfg.z0);
    let mut k = cfg.z0;
    let mut t = 0.0;
    let mut idx = 0;
    let mut events = 0u64;
    while idx < n {
        if k == 0 {
            counts.resize(n + 1, 0);
            break;
        }
        let u: f64 = rng.random();
        let next = t - (1.0 - u).ln() / (k as f64 * xi);
        while idx < n && next > cfg.obs_times[idx] {
            counts.push(k);
            idx += 1;
        }
        if idx == n {
            break;
        }
        t = next;
        if rng.random::<f64>() < p_birth {
            k += 1;
        } else {
            k -= 1;
        }
        events += 1;
        if events > cfg.max_events || k > cfg.max_pop {
            return Err(Error::ResourceCap(format!(
                "simulation stopped at t = {t:.6} with population {k} after {events} events \
                 (caps: {} events, population {}); {idx} of {n} observations recorded",
                cfg.max_events, cfg.max_pop
            )));
        }
    }
    Ok((counts, events))
}

/// Simulates one path with an explicit random source.
pub fn simulate_with<R: Rng>(cfg: &SimConfig, rng: &mut R) -> Result<SimOutcome> {
    cfg.validate()?;
    let mut rejections = 0u64;
    let mut events = 0u64;
    loop {
        let (counts, ev) = run_once(cfg, rng)?;
        events += ev;
        if !cfg.condition_nonextinct || *counts.last().unwrap() > 0 {
            let mut times = Vec::with_capacity(counts.len());
            times.push(0.0);
            times.extend_from_slice(&cfg.obs_times);
            return Ok(SimOutcome {
                trajectory: Trajectory::new(times, counts)?,
                rejections,
                events,
            });
        }
        rejections += 1;
        if rejections > cfg.max_rejections {
            return Err(Error::ResourceCap(format!(
                "no non-extinct path after {} rejections",
                cfg.max_rejections
            )));
        }
    }
}

/// Simulates one path from `cfg.seed`.
pub fn simulate_trajectory(cfg: &SimConfig) -> Result<SimOutcome> {
    simulate_with(cfg, &mut replicate_rng(cfg.seed, 0))
}

/// `m` independent paths; path `i` uses stream `i` of `cfg.seed`.
pub fn simulate_panel(cfg: &SimConfig, m: usize) -> Result<(Panel, u64)> {
    let mut trajectories = Vec::with_capacity(m);
    let mut rejections = 0;
    for i in 0..m {
        let out = simulate_with(cfg, &mut replicate_rng(cfg.seed, i as u64))?;
        rejections += out.rejections;
        trajectories.push(out.trajectory);
    }
    Ok((Panel::new(trajectories)?, rejections))
}
