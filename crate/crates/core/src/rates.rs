use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Relative threshold on `|lambda - mu| / (lambda + mu)` below which the
/// critical closed forms are used.
pub const EPS_CRIT: f64 = 1e-8;

/// Symmetric 2x2 matrix, row-major.
pub type Cov2 = [[f64; 2]; 2];

/// Per-capita birth and death rates of a linear birth-and-death process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    lambda: f64,
    mu: f64,
}

impl Rates {
    /// Rejects negative or non-finite rates and the frozen process `lambda = mu = 0`.
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !lambda.is_finite() || !mu.is_finite() {
            return domain(format!("rates must be finite, got ({lambda}, {mu})"));
        }
        if lambda < 0.0 || mu < 0.0 {
            return domain(format!("rates must be nonnegative, got ({lambda}, {mu})"));
        }
        if lambda + mu <= 0.0 {
            return domain("lambda + mu must be positive");
        }
        Ok(Self { lambda, mu })
    }

    /// Builds rates from growth rate `omega` and total event rate `xi`.
    pub fn from_omega_xi(omega: f64, xi: f64) -> Result<Self> {
        Self::new(0.5 * (xi + omega), 0.5 * (xi - omega))
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Malthusian growth rate `lambda - mu`.
    pub fn omega(&self) -> f64 {
        self.lambda - self.mu
    }

    /// Total per-capita event rate `lambda + mu`.
    pub fn xi(&self) -> f64 {
        self.lambda + self.mu
    }

    pub fn is_critical(&self) -> bool {
        self.omega().abs() <= EPS_CRIT * self.xi()
    }

    /// `(exp(omega t) - 1) / omega`, equal to `t` on the critical branch.
    ///
    /// Every closed form of the process can be written through this single
    /// quantity, which removes the 0/0 at `omega = 0`.
    pub fn growth_factor(&self, t: f64) -> f64 {
        if self.is_critical() {
            t
        } else {
            let w = self.omega();
            (w * t).exp_m1() / w
        }
    }
}
