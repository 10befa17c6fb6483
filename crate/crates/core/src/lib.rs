//! Estimation of birth and death rates of a linear birth-and-death process
//! from population counts observed at discrete times.
//!
//! Four estimators are provided: the embedded Galton–Watson moment
//! estimators ([`gw`]), a Gaussian quasi-likelihood for arbitrary
//! observation gaps ([`quasi`]), the saddlepoint maximum likelihood
//! estimator ([`saddlepoint`], [`multivariate`]) and the exact maximum
//! likelihood estimator built on [`process`]. [`simulate`] and
//! [`benchmark`] supply an exact simulator and a Monte-Carlo harness.

pub mod error;
pub mod rates;
pub mod data;
pub mod special;
pub mod process;
pub mod saddlepoint;
pub mod gw;
pub mod io;
pub mod optimize;
pub mod quasi;
pub mod multivariate;
pub mod estimate;
pub mod simulate;
pub mod benchmark;

pub use data::{Panel, Trajectory, Transition};
pub use error::{Error, Result};
pub use rates::Rates;
