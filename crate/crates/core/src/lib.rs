//! Position-dependent random maps on the unit interval.
//!
//! The crate estimates absolutely continuous invariant measures, finite or
//! σ-finite, of random maps `T = {T_t; p(t,x)}` whose branches may have an
//! indifferent fixed point at 0 or unbounded derivatives. Two estimators are
//! provided: Ulam discretization of the transfer operator ([`transfer`]) and
//! occupation counts of first-return excursions ([`first_return`]).
//! [`comparison`] builds the auxiliary envelope maps that bracket the measure
//! near 0, and [`scaling`] fits and predicts the exponent of `μ([0, ε])`.

pub mod cli;
pub mod comparison;
pub mod error;
pub mod first_return;
pub mod map_core;
pub mod par;
pub mod profile;
pub mod rng;
pub mod scaling;
pub mod transfer;

pub use error::{Error, Result};
