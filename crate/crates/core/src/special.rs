//! Small numerical helpers shared across the crate.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

const LN_FACT_TABLE: usize = 8192;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        t.push(0.0);
        for n in 1..LN_FACT_TABLE {
            t.push(ln_gamma(n as f64 + 1.0));
        }
        t
    })
}

/// `log(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < LN_FACT_TABLE {
        ln_fact_table()[n as usize]
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// `log C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `ln(e^x - 1)` for `x > 0`, without overflow for large `x`.
pub fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `n * log_p` with the convention `0 * log 0 = 0`.
#[inline]
pub fn xlogy(n: f64, log_p: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        n * log_p
    }
}

/// Streaming log-sum-exp with a running maximum.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// `c(u) = u / (exp(u) - 1)`, with `c(0) = 1`.
pub fn c_fn(u: f64) -> f64 {
    if u.abs() < 1e-6 {
        1.0 - u / 2.0 + u * u / 12.0
    } else {
        u / u.exp_m1()
    }
}

/// `kappa(u) = -log c(u)`.
pub fn kappa(u: f64) -> f64 {
    if u.abs() < 1e-6 {
        u / 2.0 + u * u / 24.0
    } else if u > 1.0 {
        // log((e^u - 1)/u) = u + log(1 - e^-u) - log u
        u + (-(-u).exp()).ln_1p() - u.ln()
    } else {
        (u.exp_m1() / u).ln()
    }
}

/// `kappa'(u)`, strictly increasing from 0 to 1.
pub fn kappa_prime(u: f64) -> f64 {
    if u.abs() < 1e-6 {
        0.5 + u / 12.0
    } else {
        // d/du log((e^u - 1)/u) = e^u/(e^u - 1) - 1/u
        1.0 / (-(-u).exp_m1()) - 1.0 / u
    }
}

/// `kappa''(u)`.
pub fn kappa_second(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        1.0 / 12.0 - u * u / 240.0
    } else {
        // -e^u/(e^u-1)^2 + 1/u^2
        let em = u.exp_m1();
        1.0 / (u * u) - (u.exp() / em) / em
    }
}
