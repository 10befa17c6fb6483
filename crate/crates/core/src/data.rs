//! Discretely observed population paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for [`Panel::equal_spacing`].
pub const SPACING_TOL: f64 = 1e-9;

/// One observed transition: `start` individuals grow to `end` over `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub tau: f64,
    pub start: u64,
    pub end: u64,
}

/// A single population path observed at increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    times: Vec<f64>,
    counts: Vec<u64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if times.len() != counts.len() {
            return Err(Error::Precondition(format!(
                "{} times but {} counts",
                times.len(),
                counts.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Precondition(
                "a trajectory needs at least two observations".into(),
            ));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Precondition("observation times must be finite".into()));
        }
        if let Some(w) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Precondition(format!(
                "times must be strictly increasing (index {})",
                w + 1
            )));
        }
        if counts[0] == 0 {
            return Err(Error::Precondition("initial count must be positive".into()));
        }
        if let Some(first_zero) = counts.iter().position(|&k| k == 0) {
            if counts[first_zero..].iter().any(|&k| k != 0) {
                return Err(Error::Precondition(format!(
                    "count becomes positive after extinction at index {first_zero}"
                )));
            }
        }
        Ok(Self { times, counts })
    }

    /// Equally spaced observations starting at time 0.
    pub fn equally_spaced(dt: f64, counts: Vec<u64>) -> Result<Self> {
        let times = (0..counts.len()).map(|j| j as f64 * dt).collect();
        Self::new(times, counts)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of transitions `N`.
    pub fn n_transitions(&self) -> usize {
        self.times.len() - 1
    }

    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.times
            .windows(2)
            .zip(self.counts.windows(2))
            .map(|(t, k)| Transition {
                tau: t[1] - t[0],
                start: k[0],
                end: k[1],
            })
    }

    /// Transitions up to and including the first extinction.
    pub fn live_transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.transitions().take_while(|tr| tr.start > 0)
    }

    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.windows(2).map(|w| w[1] - w[0])
    }

    /// Smallest count among the starting states of the transitions.
    pub fn min_start_count(&self) -> u64 {
        self.counts[..self.counts.len() - 1]
            .iter()
            .copied()
            .min()
            .unwrap_or(0)
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

/// `M >= 1` independent trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    trajectories: Vec<Trajectory>,
}

impl Panel {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::Precondition("a panel needs at least one trajectory".into()));
        }
        Ok(Self { trajectories })
    }

    pub fn single(trajectory: Trajectory) -> Self {
        Self {
            trajectories: vec![trajectory],
        }
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn n_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.trajectories.iter().flat_map(|tr| tr.transitions())
    }

    pub fn live_transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.trajectories.iter().flat_map(|tr| tr.live_transitions())
    }

    /// The common inter-observation gap, if all gaps agree to relative `tol`.
    pub fn common_spacing(&self, tol: f64) -> Option<f64> {
        let first = self.trajectories[0].gaps().next()?;
        let all_equal = self
            .trajectories
            .iter()
            .flat_map(|tr| tr.gaps())
            .all(|g| (g - first).abs() <= tol * first.abs().max(g.abs()));
        all_equal.then_some(first)
    }

    pub fn equal_spacing(&self, tol: f64) -> bool {
        self.common_spacing(tol).is_some()
    }

    pub fn min_start_count(&self) -> u64 {
        self.trajectories
            .iter()
            .map(Trajectory::min_start_count)
            .min()
            .unwrap_or(0)
    }

    pub fn max_count(&self) -> u64 {
        self.trajectories
            .iter()
            .map(Trajectory::max_count)
            .max()
            .unwrap_or(0)
    }

    /// Mean inter-observation gap over all transitions.
    pub fn mean_gap(&self) -> f64 {
        let (sum, n) = self
            .trajectories
            .iter()
            .flat_map(|tr| tr.gaps())
            .fold((0.0, 0usize), |(s, n), g| (s + g, n + 1));
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_trajectory_invariants() {
        assert!(Trajectory::new(vec![0.0], vec![1]).is_err());
        assert!(Trajectory::new(vec![0.0, 1.0], vec![1]).is_err());
        assert!(Trajectory::new(vec![0.0, 0.0], vec![1, 2]).is_err());
        assert!(Trajectory::new(vec![0.0, 1.0], vec![0, 0]).is_err());
        assert!(Trajectory::new(vec![0.0, 1.0, 2.0], vec![3, 0, 1]).is_err());
        assert!(Trajectory::new(vec![0.0, 1.0, 2.0], vec![3, 0, 0]).is_ok());
    }

    #[test]
    fn live_transitions_stop_after_first_zero() {
        let tr = Trajectory::equally_spaced(1.0, vec![3, 1, 0, 0, 0]).unwrap();
        assert_eq!(tr.transitions().count(), 4);
        let live: Vec<_> = tr.live_transitions().map(|t| (t.start, t.end)).collect();
        assert_eq!(live, vec![(3, 1), (1, 0)]);
    }

    #[test]
    fn spacing_predicate() {
        let a = Trajectory::equally_spaced(0.1, vec![1, 2, 3]).unwrap();
        let b = Trajectory::new(vec![5.0, 5.1, 5.2], vec![4, 4, 5]).unwrap();
        let c = Trajectory::new(vec![0.0, 0.1, 0.3], vec![4, 4, 5]).unwrap();
        assert!(Panel::new(vec![a.clone(), b]).unwrap().equal_spacing(SPACING_TOL));
        assert!(!Panel::new(vec![a, c]).unwrap().equal_spacing(SPACING_TOL));
    }
}
