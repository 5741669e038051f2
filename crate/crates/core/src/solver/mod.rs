//! Kernel solvers: the strip certificate and inversion for the delay
//! equation kernel `x0`, and the series and transform routes for the level
//! kernel `ψ`.

pub mod level;
pub mod strip;
pub mod x0;

pub use level::{
    cumulative_distribution, increment_level_inputs, increment_solution_kernel, level_kernel_series,
    level_kernel_transform, level_residual, scan_level_denominator, DenominatorReport,
};
pub use strip::{find_strip, ScanConfig, ScanSummary, StripReport};
pub use x0::{
    convolve_kernel_with_x0_measure, domination_mass, fractional_integral, mass_identity, measure_total_mass,
    resolvent_residual, solve_x0, solve_x0_with, transform_consistency, x0_measure, InversionConfig, InversionGrid,
};
