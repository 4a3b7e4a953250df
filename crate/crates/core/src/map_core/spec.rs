use rand::Rng;
use serde::{Deserialize, Serialize};

use super::branch::{Branch, BranchForm};
use super::density::{DensityForm, SelectionDensity};
use super::params::{ParamPoint, ParameterSpace};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Branch limit per parameter point.
pub const MAX_BRANCHES: usize = 64;

/// Proposals allowed per rejection draw before declaring a stall.
pub const REJECTION_BUDGET: u64 = 100_000;

/// One Markov step of a random map. Implemented by [`RandomMapSpec`] and by
/// the identity mixtures in `comparison`.
pub trait MarkovStep: Sync {
    fn step(&self, x: f64, rng: &mut Stream) -> Result<f64>;

    /// The full one-step law from `x` as `(probability, image)` pairs, when
    /// it is finitely supported.
    fn outcomes(&self, _x: f64) -> Option<Result<Vec<(f64, f64)>>> {
        None
    }
}

/// How the branch list is produced from a parameter point.
#[derive(Debug, Clone, PartialEq)]
pub enum MapFamily {
    /// `x + (1/t)(t/(t−1))^t x^t` on `[0, c_t)`, `(tx − t + 1)^(1/s)` on `[c_t, 1]`.
    Example11,
    /// `t/(t−1)·x` on `[0, c_t)`, `(tx − t + 1)^(1/s)` on `[c_t, 1]`.
    Example12,
    /// `x + 4⁻¹(4/3)^t x^t` on `[0, 3/4)`, `s/(s+1)·(4x − 3)^(1/s)` on `[3/4, 1]`.
    Example71,
    /// `x + x^t mod 1`; `cut` solves `cut + cut^t = 1`.
    LsvMod1 { cut: f64 },
    /// `4x/3` on `[0, 3/4)`, `(4x − 3)^(1/s)` on `[3/4, 1]`.
    IntroRoot,
    /// Explicit branch lists: one shared list, or one per atom.
    Custom { maps: Vec<Vec<Branch>> },
    /// `left` on `[0, cut)`, the base family on `[cut, 1]`.
    Aux {
        base: Box<MapFamily>,
        cut: f64,
        left: Vec<Branch>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeftClass {
    /// `T'(0) = 1` for almost every parameter.
    Indifferent,
    /// `T'(0) > 1`.
    Expanding,
    Unknown,
}

/// Behaviour of the branches at the fixed point 0 across the parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NearZero {
    Linear { slope_min: f64, slope_max: f64 },
    Power {
        m_min: f64,
        m_max: f64,
        d_min: f64,
        d_max: f64,
    },
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyInfo {
    pub name: String,
    pub left: LeftClass,
    pub near_zero: NearZero,
    #[serde(default)]
    pub flags: Vec<String>,
    /// Exponent of the intro `x + x^t mod 1` map, when that is the family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lsv_t: Option<f64>,
}

impl FamilyInfo {
    pub fn unknown(name: &str) -> Self {
        Self {
            name: name.to_string(),
            left: LeftClass::Unknown,
            near_zero: NearZero::Unknown,
            flags: vec![],
            lsv_t: None,
        }
    }
}

/// The random map `T = {T_t; p(t,x)}` on `[0,1]`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMapSpec {
    pub params: ParameterSpace,
    pub family: MapFamily,
    pub density: SelectionDensity,
    /// Always 0.
    pub fixed_point: f64,
    /// `c` in `A = [c, 1]`.
    pub a_cut: f64,
    pub info: FamilyInfo,
    /// Refill the low-order bits lost by linear branches with random bits.
    /// Orbits of slopes that are powers of two otherwise collapse to an
    /// endpoint after about 53 steps.
    pub dither: bool,
}

impl MapFamily {
    /// The branch whose domain contains `x` under parameter `p`.
    pub fn branch_at(&self, p: &ParamPoint, x: f64) -> Option<Branch> {
        match self {
            MapFamily::Example11 | MapFamily::Example12 => {
                let c = (p.t - 1.0) / p.t;
                if x < c {
                    let form = if matches!(self, MapFamily::Example11) {
                        BranchForm::Example11Left { t: p.t }
                    } else {
                        BranchForm::Linear {
                            a: p.t / (p.t - 1.0),
                            b: 0.0,
                        }
                    };
                    Some(Branch::new(0.0, c, false, form))
                } else if x <= 1.0 {
                    Some(Branch::new(c, 1.0, true, root(p.t.powf(1.0 / p.s), c, p.s)))
                } else {
                    None
                }
            }
            MapFamily::Example71 => {
                if x < 0.75 {
                    let m = 0.25 * (4.0f64 / 3.0).powf(p.t);
                    Some(Branch::new(0.0, 0.75, false, BranchForm::PowerPerturb { m, d: p.t }))
                } else if x <= 1.0 {
                    let l = p.s / (p.s + 1.0) * 4f64.powf(1.0 / p.s);
                    Some(Branch::new(0.75, 1.0, true, root(l, 0.75, p.s)))
                } else {
                    None
                }
            }
            MapFamily::LsvMod1 { cut } => {
                if x < *cut {
                    Some(Branch::new(0.0, *cut, false, BranchForm::Mod1Power { t: p.t, shift: 0.0 }))
                } else if x <= 1.0 {
                    Some(Branch::new(*cut, 1.0, true, BranchForm::Mod1Power { t: p.t, shift: 1.0 }))
                } else {
                    None
                }
            }
            MapFamily::IntroRoot => {
                if x < 0.75 {
                    Some(Branch::new(0.0, 0.75, false, BranchForm::Linear { a: 4.0 / 3.0, b: 0.0 }))
                } else if x <= 1.0 {
                    Some(Branch::new(0.75, 1.0, true, root(4f64.powf(1.0 / p.s), 0.75, p.s)))
                } else {
                    None
                }
            }
            MapFamily::Custom { maps } => {
                let list = if maps.len() == 1 {
                    &maps[0]
                } else {
                    maps.get(p.atom.unwrap_or(0))?
                };
                list.iter().find(|b| b.contains(x)).copied()
            }
            MapFamily::Aux { base, cut, left } => {
                if x < *cut {
                    left.iter().find(|b| b.contains(x)).copied()
                } else {
                    base.branch_at(p, x).and_then(|b| b.clipped(*cut, 1.0))
                }
            }
        }
    }

    /// The ordered partition `{I_{t,i}}` with its branches.
    pub fn branches(&self, p: &ParamPoint) -> Vec<Branch> {
        match self {
            MapFamily::Custom { maps } => {
                if maps.len() == 1 {
                    maps[0].clone()
                } else {
                    maps.get(p.atom.unwrap_or(0)).cloned().unwrap_or_default()
                }
            }
            MapFamily::Aux { base, cut, left } => {
                let mut out: Vec<Branch> = left.clone();
                out.extend(base.branches(p).iter().filter_map(|b| b.clipped(*cut, 1.0)));
                out
            }
            _ => {
                let first = self.branch_at(p, 0.0).expect("builtin families cover 0");
                let second = self.branch_at(p, first.hi).expect("builtin families cover 1");
                vec![first, second]
            }
        }
    }

    /// Left endpoint of the root branch, `c_t`, when the family has one.
    pub fn cut_at(&self, p: &ParamPoint) -> Option<f64> {
        match self {
            MapFamily::Example11 | MapFamily::Example12 => Some((p.t - 1.0) / p.t),
            MapFamily::Example71 | MapFamily::IntroRoot => Some(0.75),
            MapFamily::LsvMod1 { cut } => Some(*cut),
            MapFamily::Aux { base, .. } => base.cut_at(p),
            MapFamily::Custom { .. } => None,
        }
    }
}

fn root(l: f64, c: f64, s: f64) -> BranchForm {
    BranchForm::ScaledRoot { l, c, s }
}

impl RandomMapSpec {
    pub fn new(
        params: ParameterSpace,
        family: MapFamily,
        density: SelectionDensity,
        a_cut: f64,
        info: FamilyInfo,
    ) -> Result<Self> {
        params.validate()?;
        if !(a_cut > 0.0 && a_cut <= 1.0) {
            return Err(Error::ConstraintViolation(format!(
                "cut c = {a_cut} must satisfy 0 < c <= 1"
            )));
        }
        let needs_bound = matches!(
            (&params, &density.form),
            (
                ParameterSpace::Rectangle { .. }
                    | ParameterSpace::Triangle { .. }
                    | ParameterSpace::Product { .. },
                DensityForm::PaperAffine { .. } | DensityForm::Polynomial { .. }
            )
        );
        if needs_bound && density.sup_bound.is_none() {
            return Err(Error::InvalidSpec {
                field: "density.sup_bound".into(),
                message: "continuous densities need a sup bound for rejection sampling".into(),
            });
        }
        if let MapFamily::Custom { maps } = &family {
            if maps.is_empty() || maps.iter().any(|m| m.is_empty() || m.len() > MAX_BRANCHES) {
                return Err(Error::InvalidSpec {
                    field: "custom.branches".into(),
                    message: format!("each map needs 1..={MAX_BRANCHES} branches"),
                });
            }
        }
        Ok(Self {
            params,
            family,
            density,
            fixed_point: 0.0,
            a_cut,
            info,
            dither: false,
        })
    }

    /// A deterministic map from one branch list.
    pub fn deterministic(name: &str, branches: Vec<Branch>, a_cut: f64) -> Result<Self> {
        Self::new(
            ParameterSpace::Singleton { t: 0.0, s: 0.0 },
            MapFamily::Custom {
                maps: vec![branches],
            },
            SelectionDensity::constant(1.0),
            a_cut,
            FamilyInfo::unknown(name),
        )
    }

    /// `T_t(x)`.
    pub fn eval_map(&self, p: &ParamPoint, x: f64) -> Result<f64> {
        if !self.params.contains(p) {
            return Err(Error::ParamOutOfSpace(p.to_string()));
        }
        self.apply(p, x)
    }

    /// `T_t(x)` without the parameter-membership check.
    #[inline]
    pub fn apply(&self, p: &ParamPoint, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        let b = self.family.branch_at(p, x).ok_or_else(|| Error::NoBranch {
            x,
            param: p.to_string(),
        })?;
        Ok(b.eval(x).clamp(0.0, 1.0))
    }

    /// `T_t'(x)`; errors at branch endpoints.
    pub fn eval_derivative(&self, p: &ParamPoint, x: f64) -> Result<f64> {
        if !self.params.contains(p) {
            return Err(Error::ParamOutOfSpace(p.to_string()));
        }
        let b = self.family.branch_at(p, x).ok_or_else(|| Error::NoBranch {
            x,
            param: p.to_string(),
        })?;
        // 0 is the fixed point: the left branch is one-sided differentiable there
        if (x == b.hi || (x == b.lo && x != 0.0)) && x != 1.0 {
            return Err(Error::NonDifferentiablePoint { x });
        }
        Ok(b.derivative(x))
    }

    /// Draws `t ~ p(t, x) ν(dt)`.
    pub fn sample_parameter(&self, x: f64, rng: &mut Stream) -> Result<ParamPoint> {
        match &self.params {
            ParameterSpace::Singleton { t, s } => Ok(ParamPoint::new(*t, *s)),
            ParameterSpace::FiniteSet { atoms } => {
                let weights = |i: usize| {
                    let p = ParamPoint {
                        t: atoms[i].t,
                        s: atoms[i].s,
                        atom: Some(i),
                    };
                    self.density.eval_in(&self.params, &p, x).max(0.0)
                };
                let i = categorical(atoms.len(), weights, rng);
                Ok(ParamPoint {
                    t: atoms[i].t,
                    s: atoms[i].s,
                    atom: Some(i),
                })
            }
            ParameterSpace::Product { a0, b0, s_atoms }
                if matches!(self.density.form, DensityForm::AtomWeights { .. }) =>
            {
                let i = categorical(s_atoms.len(), |i| self.density.atom_weight(i, x), rng);
                Ok(ParamPoint {
                    t: a0 + (b0 - a0) * rng.gen::<f64>(),
                    s: s_atoms[i],
                    atom: Some(i),
                })
            }
            space => {
                if let DensityForm::Constant { .. } = self.density.form {
                    return Ok(space.sample_uniform(rng));
                }
                let bound = self.density.sup_bound.unwrap_or(f64::INFINITY);
                for _ in 0..REJECTION_BUDGET {
                    let p = space.sample_uniform(rng);
                    let u: f64 = rng.gen();
                    if u * bound < self.density.eval_in(space, &p, x) {
                        return Ok(p);
                    }
                }
                Err(Error::RejectionStall {
                    rate: 1.0 / REJECTION_BUDGET as f64,
                    proposals: REJECTION_BUDGET,
                })
            }
        }
    }

    /// The full branch list at `p`.
    pub fn branches(&self, p: &ParamPoint) -> Vec<Branch> {
        self.family.branches(p)
    }

    /// `(inf t, sup t, inf s, sup s)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.params.bounds()
    }

    pub fn with_dither(mut self, on: bool) -> Self {
        self.dither = on;
        self
    }

    /// `A = [c, 1]` as a pair.
    pub fn a_interval(&self) -> (f64, f64) {
        (self.a_cut, 1.0)
    }
}

impl MarkovStep for RandomMapSpec {
    #[inline]
    fn step(&self, x: f64, rng: &mut Stream) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        let p = self.sample_parameter(x, rng)?;
        if self.dither {
            let b = self.family.branch_at(&p, x).ok_or_else(|| Error::NoBranch {
                x,
                param: p.to_string(),
            })?;
            if let BranchForm::Linear { a, b: off } = b.form {
                // ±2 ulp at the cancellation scale of a·x + b: narrower jitter is
                // swallowed by rounding, one-sided jitter makes 1 absorbing
                let ax = a * x;
                let scale = 4.0 * ax.abs().max(off.abs()) * f64::EPSILON;
                return Ok((ax + off + scale * (rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0));
            }
            return Ok(b.eval(x).clamp(0.0, 1.0));
        }
        self.apply(&p, x)
    }

    fn outcomes(&self, x: f64) -> Option<Result<Vec<(f64, f64)>>> {
        let atoms = self.params.atoms()?;
        let w: Vec<f64> = atoms
            .iter()
            .map(|p| match self.params {
                ParameterSpace::Singleton { .. } => 1.0,
                _ => self.density.eval_in(&self.params, p, x).max(0.0),
            })
            .collect();
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut out = Vec::with_capacity(atoms.len());
        for (p, wi) in atoms.iter().zip(w) {
            if wi > 0.0 {
                match self.apply(p, x) {
                    Ok(y) => out.push((wi / total, y)),
                    Err(e) => return Some(Err(e)),
                }
            }
        }
        Some(Ok(out))
    }
}

fn categorical(n: usize, w: impl Fn(usize) -> f64, rng: &mut Stream) -> usize {
    let total: f64 = (0..n).map(&w).sum();
    let mut u = rng.gen::<f64>() * total;
    for i in 0..n {
        let wi = w(i);
        if u < wi {
            return i;
        }
        u -= wi;
    }
    n - 1
}
