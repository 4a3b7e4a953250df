//! Auxiliary maps that bound a random map near its fixed point from below
//! and above, the identity mixture `Υ`, and numerical checks of the
//! resulting sandwich `(γ₁/γ̄₂) μ̄ ≤ μ ≤ (γ₂/(γ̂₁ inf p̂)) μ̂` on `[0, ε]`.

mod envelope;
mod mixture;
mod verify;

pub use envelope::{
    assemble_aux_map, build_envelope, support_params, Envelope, EnvelopeForm, EnvelopeOptions,
    Mode, Side, CONTAINMENT_SAMPLES, W2_GRID,
};
pub use mixture::{
    lemma21_transform, mixture_transition, two_step_identity, MixtureSpec, PHat, TwoStepCheck,
    P_HAT_GRID, P_HAT_NODES,
};
pub use verify::{verify_comparison, ComparisonBudgets, ComparisonReport, Constants, EpsRow};
