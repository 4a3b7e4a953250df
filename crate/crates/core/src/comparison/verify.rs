use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::first_return::{eps_targets, estimate_measure, EstimatorConfig, SigmaFiniteEstimate};
use crate::map_core::RandomMapSpec;
use crate::rng::StreamFactory;
use crate::transfer::{build_ulam, density_bounds_on, pullback_region, stationary_density, DensityVector};

use super::envelope::{assemble_aux_map, Envelope};
use super::mixture::PHat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBudgets {
    pub n_returns: usize,
    pub estimator: EstimatorConfig,
    pub ulam_bins: usize,
    pub ulam_samples_per_bin: usize,
    /// Relative guard band folded into each density constant.
    pub guard: f64,
    pub sigmas: f64,
}

impl Default for ComparisonBudgets {
    fn default() -> Self {
        Self {
            n_returns: 200_000,
            estimator: EstimatorConfig::default(),
            ulam_bins: 4096,
            ulam_samples_per_bin: 200,
            guard: 0.2,
            sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_bar2: f64,
    pub gamma_hat1: f64,
    pub inf_p_hat: f64,
    /// `γ₁/γ̄₂` after the guard band.
    pub lower: f64,
    /// `γ₂/(γ̂₁ inf p̂)` after the guard band.
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsRow {
    pub eps: f64,
    pub mu: f64,
    pub mu_se: f64,
    pub mu_lower_aux: f64,
    pub mu_lower_aux_se: f64,
    pub mu_upper_aux: f64,
    pub mu_upper_aux_se: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub c: f64,
    pub c_star: f64,
    pub region: Vec<(f64, f64)>,
    pub constants: Constants,
    pub rows: Vec<EpsRow>,
    pub capped_fraction: f64,
}

impl ComparisonReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.lower_holds && r.upper_holds)
    }
}

fn density_on_a(map: &RandomMapSpec, b: &ComparisonBudgets, streams: &StreamFactory) -> Result<DensityVector> {
    let m = build_ulam(map, b.ulam_bins, b.ulam_samples_per_bin, streams)?;
    let st = stationary_density(&m, crate::transfer::DEFAULT_TOL, crate::transfer::DEFAULT_MAX_ITER);
    Ok(st.density.normalized_on(map.a_cut, 1.0))
}

fn positive_finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 1e-9 {
        Ok(v)
    } else {
        Err(Error::BoundDegenerate(format!("{name} = {v} at the working resolution")))
    }
}

/// Checks `(γ₁/γ̄₂)·μ̄ ≤ μ ≤ (γ₂/(γ̂₁ inf p̂))·μ̂` on `[0, ε]` for each `ε`.
pub fn verify_comparison(
    spec: &RandomMapSpec,
    lower: &Envelope,
    upper: &Envelope,
    eps_grid: &[f64],
    budgets: &ComparisonBudgets,
    streams: &StreamFactory,
) -> Result<ComparisonReport> {
    let c = spec.a_cut;
    let c_star = lower.c_star.min(upper.c_star);
    if let Some(&e) = eps_grid.iter().find(|&&e| !(e > 0.0 && e < c_star)) {
        return Err(Error::ConstraintViolation(format!("eps = {e} outside (0, c_* = {c_star})")));
    }
    let lower_aux = assemble_aux_map(spec, lower)?;
    let upper_aux = assemble_aux_map(spec, upper)?;

    let region = pullback_region(spec, c_star, &streams.fork(1))?;
    let h = density_on_a(spec, budgets, &streams.fork(2))?;
    let h_bar = density_on_a(&lower_aux, budgets, &streams.fork(3))?;
    let h_hat = density_on_a(&upper_aux, budgets, &streams.fork(4))?;
    let (g1, g2) = density_bounds_on(&h, &region)?;
    let (_, gb2) = density_bounds_on(&h_bar, &region)?;
    let (gh1, _) = density_bounds_on(&h_hat, &region)?;
    let gamma1 = positive_finite("gamma_1", g1)?;
    let gamma2 = positive_finite("gamma_2", g2)?;
    let gamma_bar2 = positive_finite("gamma_bar_2", gb2)?;
    let gamma_hat1 = positive_finite("gamma_hat_1", gh1)?;
    let p_hat = PHat::for_envelope(spec, upper)?;
    let inf_p_hat = p_hat.inf_below(c_star);
    if !(inf_p_hat > 0.0) {
        return Err(Error::DivideByZero { x: 0.0 });
    }
    let g = budgets.guard;
    let constants = Constants {
        gamma1,
        gamma2,
        gamma_bar2,
        gamma_hat1,
        inf_p_hat,
        lower: (gamma1 * (1.0 - g)) / (gamma_bar2 * (1.0 + g)),
        upper: (gamma2 * (1.0 + g)) / (gamma_hat1 * (1.0 - g) * inf_p_hat),
    };

    let targets = eps_targets(eps_grid);
    let run = |map: &RandomMapSpec, salt: u64| -> Result<SigmaFiniteEstimate> {
        estimate_measure(map, c, &targets, budgets.n_returns, &budgets.estimator, &streams.fork(salt))
    };
    let mu = run(spec, 6)?;
    let mu_bar = run(&lower_aux, 7)?;
    let mu_hat = run(&upper_aux, 8)?;

    let k = budgets.sigmas;
    let rows = (0..eps_grid.len())
        .map(|i| {
            let lo = constants.lower * mu_bar.mu_hat[i];
            let lo_se = (constants.lower * mu_bar.stderr[i]).hypot(mu.stderr[i]);
            let hi = constants.upper * mu_hat.mu_hat[i];
            let hi_se = (constants.upper * mu_hat.stderr[i]).hypot(mu.stderr[i]);
            EpsRow {
                eps: eps_grid[i],
                mu: mu.mu_hat[i],
                mu_se: mu.stderr[i],
                mu_lower_aux: mu_bar.mu_hat[i],
                mu_lower_aux_se: mu_bar.stderr[i],
                mu_upper_aux: mu_hat.mu_hat[i],
                mu_upper_aux_se: mu_hat.stderr[i],
                lower_holds: lo <= mu.mu_hat[i] + k * lo_se,
                upper_holds: mu.mu_hat[i] <= hi + k * hi_se,
            }
        })
        .collect();
    Ok(ComparisonReport {
        c,
        c_star,
        region,
        constants,
        rows,
        capped_fraction: mu.capped_fraction.max(mu_bar.capped_fraction).max(mu_hat.capped_fraction),
    })
}
