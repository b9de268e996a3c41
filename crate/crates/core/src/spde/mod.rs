//! The planar hyperbolic system driven by two-parameter white noise.

mod coeffs;
mod solver;

pub use coeffs::{check_coefficients, CoefficientCheck, Coefficients, Diffusion, Drift};
pub use solver::{
    continue_from, driving_noise, girsanov_terms, girsanov_weight, node_of, solve, solve_seeded, WeightDirection,
};
