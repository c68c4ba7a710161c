//! Boundary-crossing exponents of self-similar Gaussian processes.
//!
//! The crate simulates fractional Brownian motion, Brownian motion and the
//! trace of a fractional stochastic heat equation, estimates the survival
//! probability of the Lamperti-transformed stationary process inside a band
//! `[-c, c]`, fits the exponential decay rate of that survival, and computes
//! the special functions and analytic bounds that bracket it.
//!
//! Module map:
//! - [`kernels`]: process specifications, covariance kernels, Lamperti transform.
//! - [`quadrature`]: spectral integrals for the SPDE-trace process.
//! - [`sampler`]: exact Gaussian path samplers and sampling schedules.
//! - [`passage`]: passage times, survival curves and exponent fitting.
//! - [`bounds`]: Kummer's function, the Brownian exponent and analytic bounds.
//! - [`cli`]: the `passage-lab` command-line surface.

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod passage;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
