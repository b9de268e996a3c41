//! Capacities, multiparameter Gaussian fields, a hyperbolic SPDE on the plane
//! and Monte Carlo hitting probabilities.

pub mod capacity;
pub mod dimension;
pub mod error;
pub mod fields;
pub mod hitting;
pub mod kernels;
pub mod rng;
pub mod spde;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
