//! Ulam discretization of the transfer operator
//! `𝓛_T g(x) = ∫_W 𝓛_{T_t}(p(t,·) g)(x) ν(dt)`, stationary densities, and
//! checks of the density-bound hypotheses.

pub mod bounds;
pub mod grid;
pub mod hypotheses;
pub mod matrix;

pub use bounds::{density_bounds_on, merge_intervals, pullback_region};
pub use grid::{DensityVector, UlamGrid};
pub use hypotheses::{check_hypotheses, HypothesisMode, HypothesisReport, Status};
pub use matrix::{
    apply_pf, build_ulam, stationary_density, stationary_density_from, StationaryResult,
    TransitionMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
