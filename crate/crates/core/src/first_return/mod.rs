//! The first-return random map `R` on `A = [c, 1]` and occupation estimates
//! of the (possibly infinite) invariant measure near 0.
//!
//! An excursion from `x ∈ A` is the orbit `X_1, …, X_n` with
//! `X_1 … X_{n−1} ∉ A` and `X_n ∈ A`. Averaging visit counts over excursions
//! whose starts follow the return-state chain gives `μ(D)` normalized by
//! `μ(A) = 1`, because that chain is stationary for `μ|_A`.

pub mod estimate;
pub mod excursion;
pub mod targets;

pub use estimate::{
    check_r_invariance, estimate_measure, estimate_return_probs, EstimatorConfig,
    InvarianceReport, ReturnTimeHistogram, SigmaFiniteEstimate, MIN_RETURNS,
};
pub use excursion::{
    run_excursion, simulate_first_return, Excursion, ExcursionBatch, Outcome, ReturnHistogram,
    SimulationOptions, DEFAULT_CAP, STALL_WINDOW, ZERO_FLOOR,
};
pub use targets::{eps_targets, Target, TargetSet, Tally};
