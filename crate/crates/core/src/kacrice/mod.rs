//! Kac-Rice moment integrals for level sets, and the small-lag convergence
//! classifier that decides whether second moments are finite.

mod classify;
mod critical;
mod oned;
mod radial;

use serde::Serialize;

use crate::covmodels::Moment;

pub use classify::{
    classify_form, geman_classify, ClassifierConfig, DyadicGrid, FormFit, GemanClass, GemanReport, GemanRow, GemanSummary,
};
pub use critical::{critical_condition, critical_variance, CriticalConditioning, CriticalReport};
pub use oned::{integrand_1d, rice_mean_1d, second_factorial_moment_1d, KacRiceIntegrand1D, OneDConfig};
pub use radial::{
    expected_abs_det, length_second_moment_2d_to_1d, mean_length_2d, mean_roots_2d, overlap_kernel, pair_density,
    second_moment_2d_zero, sigma2_max, FieldMomentReport, InnerMcConfig, RadialConfig, RadialRow, Rect,
};

/// First and second moments of a level-set count or measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub mean: f64,
    /// `E[N(N - 1)]` for counts, `E[L^2]` for measures.
    pub second_factorial: Moment,
    /// `E[N^2]`.
    pub second_moment: Moment,
    pub quad_error: f64,
    pub geman: GemanSummary,
    /// Standard error contributed by inner Monte Carlo (0 when none).
    pub inner_mc_se: f64,
}

#[cfg(test)]
mod tests;
