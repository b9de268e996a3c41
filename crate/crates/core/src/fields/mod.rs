//! Multiparameter Gaussian fields: covariances, grid simulation and checks.

mod a1;
mod covariance;
mod grid;
pub mod refine;
mod simulate;

pub use a1::{check_hypothesis_a1, A1Report};
pub use covariance::{fbm_axis, CovarianceModel, Family};
pub use grid::{FieldPath, Grid};
pub use simulate::{rect_step, sheet_from_increments, sheet_increments, simulate, FieldSimulator, FBM_MAX_NODES};
