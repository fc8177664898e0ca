//! Two-term power law `A * D^-alpha + B * D^-gamma` relating generator
//! training-set size to the downstream error-rate ratio.

mod fit;
mod io;

pub use fit::{extrapolate_to_target, fit_power_law, predict, FitOptions, ScalingFit, ScalingPoint};
pub use io::read_points_csv;
