//! Analytic models and a multi-cell simulator for uplink partial
//! decode-and-forward relaying through idle users, in networks where active
//! users, idle users and base stations are Poisson distributed.
//!
//! The analytic side lives in [`policies`] (cooperation probabilities),
//! [`interference`] (moments, Laplace transforms, Gamma fits) and [`rates`].
//! [`montecarlo`] simulates the same network directly and serves as the
//! oracle. [`experiments`] and [`cli`] drive the sweeps.

pub mod acceptance;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod interference;
pub mod montecarlo;
pub mod policies;
pub mod quadrature;
pub mod rates;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
