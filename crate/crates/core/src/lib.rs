//! Limit theorems for the least common multiple of a random set of integers.
//!
//! Each element of `{1, ..., n}` is kept independently with probability
//! `theta`; `L_n` is the LCM of what remains. This crate computes `log L_n`
//! exactly, evaluates the deterministic limit objects (the variance function
//! `g`, the covariance kernel of the Gaussian limit, exact means), simulates
//! the limit Gaussian process two independent ways, and runs reproducible
//! Monte Carlo experiments that check the central, functional, strong-law and
//! Poisson limits at desk scale.
//!
//! Modules, bottom-up:
//!
//! * [`numtheory`] - sieve, von Mangoldt, Chebyshev functions, big-integer LCM.
//! * [`analytic`] - closed forms and truncated series.
//! * [`sampler`] - random subsets, exact `log L_n`, paths `t -> log L_{floor(nt)}`.
//! * [`gausslimit`] - series and Cholesky simulation of the limit process.
//! * [`experiments`] - Monte Carlo harnesses producing [`experiments::ExperimentReport`]s.

#![forbid(unsafe_code)]

pub mod analytic;
mod error;
pub mod experiments;
pub mod gausslimit;
pub mod linalg;
pub mod numtheory;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod sum;

pub use error::{Error, Result};
