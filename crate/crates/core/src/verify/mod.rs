//! Fitted-constant checks of the quantitative statements, with pass flags.

mod density;
mod girsanov;
pub mod kde;
mod occupation;
mod phi;
mod sandwich;

pub use density::{
    conditional_density_check, envelope_rate, exact_increment, exact_marginal, fit_density, marginal_density_check,
    radial_points, worst_constants, DensityFitReport, EnvelopeRate, Gaussian,
};
pub use girsanov::{girsanov_crosscheck, GirsanovReport};
pub use occupation::{
    occupation_density, pair_occupation_ratio, unit_ball_volume, OccupationEstimate, PairReport, PairRow,
    MIN_JOINT_PATHS,
};
pub use phi::{integrate, phi, phi_check, sphere_area, PhiCase, PhiReport};
pub use sandwich::{sandwich_report, SandwichReport, SandwichRow};
