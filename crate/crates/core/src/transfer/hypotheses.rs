//! Numeric checks of the existence hypotheses for absolutely continuous
//! invariant measures, with `g(t, x) = p(t, x) / |T_t'(x)|`.

use serde::{Deserialize, Serialize};

use crate::map_core::{ParamPoint, RandomMapSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisMode {
    /// Finite acim: `sup ∫ g < 1` and bounded variation.
    Expanding,
    /// σ-finite acim around the indifferent fixed point 0.
    Indifferent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub t: f64,
    pub s: f64,
    pub m: f64,
    pub d: f64,
    /// Closed-form `(m, d)` when the branch exposes one.
    pub exact: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub mode: HypothesisMode,
    pub conditions: Vec<Condition>,
    pub expansions: Vec<ExpansionFit>,
}

impl HypothesisReport {
    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.status == Status::Pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisSettings {
    pub x_grid: usize,
    /// Excluded neighbourhood `[0, δ)` of the fixed point in indifferent mode.
    pub neighborhood: f64,
    /// Variation bound `M`.
    pub tv_bound: f64,
    pub quadrature_order: usize,
}

impl Default for HypothesisSettings {
    fn default() -> Self {
        Self {
            x_grid: 256,
            neighborhood: 0.01,
            tv_bound: 1e3,
            quadrature_order: 16,
        }
    }
}

pub fn check_hypotheses(spec: &RandomMapSpec, mode: HypothesisMode) -> HypothesisReport {
    check_hypotheses_with(spec, mode, HypothesisSettings::default())
}

fn g(spec: &RandomMapSpec, p: &ParamPoint, x: f64) -> f64 {
    let Some(b) = spec.family.branch_at(p, x) else {
        return 0.0;
    };
    if x <= b.lo && x != 0.0 || x >= b.hi && x != 1.0 {
        return 0.0;
    }
    let d = b.derivative(x).abs();
    if !d.is_finite() || d == 0.0 {
        return 0.0;
    }
    spec.density.eval_in(&spec.params, p, x) / d
}

pub fn check_hypotheses_with(
    spec: &RandomMapSpec,
    mode: HypothesisMode,
    cfg: HypothesisSettings,
) -> HypothesisReport {
    let quad = spec.params.quadrature(cfg.quadrature_order);
    let mut conditions = Vec::new();

    // sup_x ∫ g(t,x) ν(dt), on cell midpoints
    let x0 = match mode {
        HypothesisMode::Expanding => 0.0,
        HypothesisMode::Indifferent => cfg.neighborhood,
    };
    let mut sup = 0.0f64;
    let mut argsup = x0;
    for k in 0..cfg.x_grid {
        let x = x0 + (1.0 - x0) * (k as f64 + 0.5) / cfg.x_grid as f64;
        let v: f64 = quad.iter().map(|(p, w)| w * g(spec, p, x)).sum();
        if v > sup {
            sup = v;
            argsup = x;
        }
    }
    conditions.push(Condition {
        name: "sup-integral".into(),
        status: if sup < 1.0 { Status::Pass } else { Status::Fail },
        value: sup,
        detail: format!("sup over x >= {x0} of the integral of g is {sup:.6} at x = {argsup:.4}"),
    });

    // total variation of g(t,·) per quadrature parameter
    let mut tv_max = 0.0f64;
    for (p, _) in &quad {
        tv_max = tv_max.max(total_variation(spec, p, 4096));
    }
    conditions.push(Condition {
        name: "bounded-variation".into(),
        status: if !tv_max.is_finite() {
            Status::Fail
        } else if tv_max < cfg.tv_bound {
            Status::Pass
        } else {
            Status::Inconclusive
        },
        value: tv_max,
        detail: format!("largest sampled variation of g(t, .) is {tv_max:.4}"),
    });

    let mut expansions = Vec::new();
    if mode == HypothesisMode::Indifferent {
        let xs: Vec<f64> = (0..64)
            .map(|k| cfg.neighborhood * (1e-4f64).powf(1.0 - k as f64 / 63.0))
            .collect();
        let mut worst = 0usize;
        let mut checked = 0usize;
        for (p, _) in &quad {
            checked += 1;
            let vals: Vec<f64> = xs.iter().map(|&x| g(spec, p, x)).collect();
            // g must not increase as x moves away from 0
            if vals.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
                worst += 1;
            }
        }
        conditions.push(Condition {
            name: "monotone-near-zero".into(),
            status: if checked == 0 {
                Status::Inconclusive
            } else if worst == 0 {
                Status::Pass
            } else {
                Status::Fail
            },
            value: worst as f64,
            detail: format!("{worst} of {checked} parameters break monotonicity on (0, {})", cfg.neighborhood),
        });

        let mut ok = true;
        for (p, _) in quad.iter().take(256) {
            match fit_expansion(spec, p) {
                Some(f) => {
                    ok &= f.m > 0.0 && f.d > 1.0;
                    expansions.push(f);
                }
                None => ok = false,
            }
        }
        conditions.push(Condition {
            name: "local-expansion".into(),
            status: if expansions.is_empty() {
                Status::Inconclusive
            } else if ok {
                Status::Pass
            } else {
                Status::Fail
            },
            value: expansions.iter().map(|f| f.d).fold(f64::NAN, f64::min),
            detail: "log-log fit of T_t(x) - x on [1e-6, 1e-2]; value is the smallest d".into(),
        });
    }
    HypothesisReport {
        mode,
        conditions,
        expansions,
    }
}

fn total_variation(spec: &RandomMapSpec, p: &ParamPoint, n: usize) -> f64 {
    let mut knots: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    for b in spec.branches(p) {
        // approach each endpoint from inside so jumps are captured
        for x in [b.lo, b.hi] {
            knots.push(x);
            knots.push((x - 1e-9).max(0.0));
            knots.push((x + 1e-9).min(1.0));
        }
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots
        .windows(2)
        .map(|w| (g(spec, p, w[1]) - g(spec, p, w[0])).abs())
        .sum()
}

/// Least-squares fit of `log(T(x) − x) = log m + d·log x`.
pub fn fit_expansion(spec: &RandomMapSpec, p: &ParamPoint) -> Option<ExpansionFit> {
    let b = spec.family.branch_at(p, 1e-9)?;
    let pts: Vec<(f64, f64)> = (0..41)
        .filter_map(|k| {
            let x = 10f64.powf(-6.0 + 4.0 * k as f64 / 40.0);
            let y = b.eval(x) - x;
            (y > 0.0).then(|| (x.ln(), y.ln()))
        })
        .collect();
    let (slope, intercept) = crate::scaling::ols(&pts)?;
    Some(ExpansionFit {
        t: p.t,
        s: p.s,
        m: intercept.exp(),
        d: slope,
        exact: b.form.power_expansion(),
    })
}
