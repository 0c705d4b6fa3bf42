//! Ordered exponential random walks.
//!
//! Harmonic functions, killed transition densities, exit-time laws and
//! largest/smallest-particle distributions for walks with exponential
//! increments, together with Monte Carlo cross-checks.

pub mod density;
pub mod error;
pub mod exittime;
pub mod fredholm;
pub mod harmonic;
pub mod mathcore;
pub mod mcsim;
pub mod rng;
pub mod verify;
pub mod walkmodel;

pub use error::{Error, Result};
