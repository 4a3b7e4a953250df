use serde::{Deserialize, Serialize};

use super::branch::BranchForm;
use super::params::ParamPoint;
use super::spec::RandomMapSpec;
use crate::rng::{Domain, StreamFactory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationTolerances {
    pub coverage_gap: f64,
    pub normalization: f64,
    pub fixed_point: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            coverage_gap: 1e-12,
            normalization: 1e-3,
            fixed_point: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub param: ParamPoint,
    pub coverage_gap: f64,
    pub overlap: f64,
    pub monotonicity_violations: usize,
    pub fixed_point_residual: f64,
    pub branch_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ParamCheck>,
    /// `(x, |∫ p(t,x) ν(dt) − 1|)` on a 32-point grid.
    pub normalization_residuals: Vec<(f64, f64)>,
    pub negative_density: bool,
    pub sup_bound_exceeded: bool,
    pub max_coverage_gap: f64,
    pub max_normalization_residual: f64,
    pub max_fixed_point_residual: f64,
    pub failures: Vec<String>,
    /// Non-fatal findings.
    #[serde(default)]
    pub warnings: Vec<String>,
    pub passed: bool,
}

pub fn validate_spec(spec: &RandomMapSpec) -> ValidationReport {
    validate_spec_with(spec, 64, &ValidationTolerances::default())
}

pub fn validate_spec_with(
    spec: &RandomMapSpec,
    n_samples: usize,
    tol: &ValidationTolerances,
) -> ValidationReport {
    let mut rng = StreamFactory::new(0x5eed).substream(Domain::Validation, 0);
    let params: Vec<ParamPoint> = match spec.params.atoms() {
        Some(atoms) => atoms,
        None => (0..n_samples).map(|_| spec.params.sample_uniform(&mut rng)).collect(),
    };
    let checks: Vec<ParamCheck> = params.iter().map(|p| check_param(spec, p)).collect();

    let quad = spec.params.quadrature(16);
    let mut negative = false;
    let mut over_sup = false;
    let normalization_residuals: Vec<(f64, f64)> = (0..32)
        .map(|k| {
            let x = k as f64 / 31.0;
            let mut mass = 0.0;
            for (p, w) in &quad {
                let v = spec.density.eval_in(&spec.params, p, x);
                negative |= v < 0.0;
                if let Some(m) = spec.density.sup_bound {
                    over_sup |= v > m * (1.0 + 1e-9);
                }
                mass += w * v;
            }
            (x, (mass - 1.0).abs())
        })
        .collect();

    let max_of = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
    let max_coverage_gap = max_of(&mut checks.iter().map(|c| c.coverage_gap.max(c.overlap)));
    let max_fixed = max_of(&mut checks.iter().map(|c| c.fixed_point_residual));
    let max_norm = max_of(&mut normalization_residuals.iter().map(|r| r.1));

    let mut failures = vec![];
    if max_coverage_gap > tol.coverage_gap {
        failures.push(format!("partition coverage gap {max_coverage_gap:.3e}"));
    }
    let mono: usize = checks.iter().map(|c| c.monotonicity_violations).sum();
    if mono > 0 {
        failures.push(format!("{mono} monotonicity violations"));
    }
    if max_fixed > tol.fixed_point {
        failures.push(format!("fixed-point residual {max_fixed:.3e}"));
    }
    if max_norm > tol.normalization {
        failures.push(format!("density normalization residual {max_norm:.3e}"));
    }
    if negative {
        failures.push("negative density value".into());
    }
    if over_sup {
        failures.push("density exceeds its sup bound".into());
    }
    let mut warnings = vec![];
    let binary_slope = params.iter().any(|p| {
        spec.branches(p).iter().any(|b| match b.form {
            BranchForm::Linear { a, b: off } => {
                let a = a.abs();
                a >= 2.0 && a.log2().fract() == 0.0 && off != 0.0
            }
            _ => false,
        })
    });
    if binary_slope && !spec.dither {
        warnings.push(
            "linear branch with power-of-two slope: floating-point orbits collapse after ~53 steps; \
             set `dither` for trajectory estimators"
                .into(),
        );
    }
    ValidationReport {
        warnings,
        passed: failures.is_empty(),
        checks,
        normalization_residuals,
        negative_density: negative,
        sup_bound_exceeded: over_sup,
        max_coverage_gap,
        max_normalization_residual: max_norm,
        max_fixed_point_residual: max_fixed,
        failures,
    }
}

fn check_param(spec: &RandomMapSpec, p: &ParamPoint) -> ParamCheck {
    let mut branches = spec.branches(p);
    branches.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut covered = 0.0;
    let mut overlap = 0.0;
    let mut reach = 0.0f64;
    for b in &branches {
        let lo = b.lo.clamp(0.0, 1.0);
        let hi = b.hi.clamp(0.0, 1.0);
        if hi <= lo {
            continue;
        }
        if lo < reach {
            overlap += reach.min(hi) - lo;
        }
        covered += (hi - reach.max(lo)).max(0.0);
        reach = reach.max(hi);
    }
    let mut violations = 0;
    for b in &branches {
        let n = 33;
        let inc = b.is_increasing();
        let mut prev = None;
        for k in 1..n {
            let x = b.lo + (b.hi - b.lo) * k as f64 / n as f64;
            let v = b.eval(x);
            if let Some(pv) = prev {
                if (inc && v < pv) || (!inc && v > pv) {
                    violations += 1;
                }
            }
            prev = Some(v);
        }
    }
    let fixed = spec
        .family
        .branch_at(p, 0.0)
        .map(|b| b.eval(0.0).abs())
        .unwrap_or(f64::INFINITY);
    ParamCheck {
        param: *p,
        coverage_gap: (1.0 - covered).max(0.0),
        overlap,
        monotonicity_violations: violations,
        fixed_point_residual: fixed,
        branch_count: branches.len(),
    }
}
