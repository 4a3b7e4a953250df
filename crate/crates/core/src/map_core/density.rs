use serde::{Deserialize, Serialize};

use super::params::{ParamPoint, ParameterSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    #[serde(default)]
    pub pt: i32,
    #[serde(default)]
    pub ps: i32,
    #[serde(default)]
    pub px: i32,
}

/// Selection density `p(t, x)` against `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum DensityForm {
    Constant {
        value: f64,
    },
    /// `8st(1−x)/(c0²(b0²−a0²)²) + 2x/(c0(b0−a0)²)`
    PaperAffine { c0: f64, a0: f64, b0: f64 },
    /// `Σ coef · t^pt · s^ps · x^px`
    Polynomial { terms: Vec<Monomial> },
    /// Weights on the counting factor, piecewise constant in `x`:
    /// row `k` applies on `[knots[k], knots[k+1])`. On product spaces the
    /// Lebesgue `t` factor gets the uniform density.
    AtomWeights {
        #[serde(default)]
        knots: Vec<f64>,
        weights: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDensity {
    #[serde(flatten)]
    pub form: DensityForm,
    /// Upper bound `M ≥ sup p` used by rejection sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_bound: Option<f64>,
}

impl SelectionDensity {
    pub fn constant(value: f64) -> Self {
        Self {
            form: DensityForm::Constant { value },
            sup_bound: Some(value),
        }
    }

    /// Uniform probability on `W`.
    pub fn uniform_on(space: &ParameterSpace) -> Self {
        Self::constant(1.0 / space.volume())
    }

    pub fn paper_affine(c0: f64, a0: f64, b0: f64) -> Self {
        let mut d = Self {
            form: DensityForm::PaperAffine { c0, a0, b0 },
            sup_bound: None,
        };
        // affine in x, increasing in s·t: the sup sits at a corner
        let top = ParamPoint::new(b0, c0 * b0);
        let m = d.eval(&top, 0.0).max(d.eval(&top, 1.0));
        d.sup_bound = Some(m * (1.0 + 1e-12));
        d
    }

    pub fn atom_weights(weights: Vec<f64>) -> Self {
        Self {
            form: DensityForm::AtomWeights {
                knots: vec![],
                weights: vec![weights],
            },
            sup_bound: None,
        }
    }

    /// `p(t, x)`. For atom weights on a product space the returned value is
    /// already the joint density against Lebesgue × counting.
    pub fn eval_in(&self, space: &ParameterSpace, p: &ParamPoint, x: f64) -> f64 {
        match &self.form {
            DensityForm::AtomWeights { .. } => {
                let w = self.atom_weight(p.atom.unwrap_or(0), x);
                match space {
                    ParameterSpace::Product { a0, b0, .. } => w / (b0 - a0),
                    _ => w,
                }
            }
            _ => self.eval(p, x),
        }
    }

    /// `p(t, x)` for forms that do not depend on the space.
    pub fn eval(&self, p: &ParamPoint, x: f64) -> f64 {
        match &self.form {
            DensityForm::Constant { value } => *value,
            DensityForm::PaperAffine { c0, a0, b0 } => {
                let d1 = c0 * c0 * (b0 * b0 - a0 * a0).powi(2);
                let d2 = c0 * (b0 - a0).powi(2);
                8.0 * p.s * p.t * (1.0 - x) / d1 + 2.0 * x / d2
            }
            DensityForm::Polynomial { terms } => terms
                .iter()
                .map(|m| m.coef * p.t.powi(m.pt) * p.s.powi(m.ps) * x.powi(m.px))
                .sum(),
            DensityForm::AtomWeights { .. } => self.atom_weight(p.atom.unwrap_or(0), x),
        }
    }

    pub fn atom_weight(&self, atom: usize, x: f64) -> f64 {
        match &self.form {
            DensityForm::AtomWeights { knots, weights } => {
                let row = if knots.len() < 2 {
                    0
                } else {
                    let k = knots.partition_point(|&k| k <= x);
                    k.saturating_sub(1).min(weights.len() - 1)
                };
                weights[row].get(atom).copied().unwrap_or(0.0)
            }
            _ => f64::NAN,
        }
    }

    pub fn depends_on_x(&self) -> bool {
        match &self.form {
            DensityForm::Constant { .. } => false,
            DensityForm::PaperAffine { .. } => true,
            DensityForm::Polynomial { terms } => terms.iter().any(|m| m.px != 0 && m.coef != 0.0),
            DensityForm::AtomWeights { weights, .. } => weights.len() > 1,
        }
    }

    /// `∫_W p(t, x) ν(dt)` by quadrature.
    pub fn total_mass(&self, space: &ParameterSpace, x: f64) -> f64 {
        space
            .quadrature(16)
            .iter()
            .map(|(p, w)| w * self.eval_in(space, p, x))
            .sum()
    }
}
