use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_core::{
    validate_spec, Branch, BranchForm, FamilyInfo, MapFamily, NearZero, ParamPoint,
    ParameterSpace, RandomMapSpec,
};
use crate::rng::{Domain, StreamFactory};

/// Sampled `(t, ε)` pairs for the containment checks.
pub const CONTAINMENT_SAMPLES: usize = 256;
/// Log-spaced radii deciding `W₂(τ₂)` membership.
pub const W2_GRID: usize = 64;
/// Decades below `c_*` covered by the membership grid.
const W2_DECADES: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `τ₁ ≥ T_t` near 0.
    Lower,
    /// `τ₂ ≤ T_t` near 0 on `W₂(τ₂)`.
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Indifferent,
    Expanding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvelopeForm {
    /// `x + m·x^d`
    Power { m: f64, d: f64 },
    /// `a·x`
    Linear { a: f64 },
}

impl EnvelopeForm {
    fn branch_form(&self) -> BranchForm {
        match *self {
            EnvelopeForm::Power { m, d } => BranchForm::PowerPerturb { m, d },
            EnvelopeForm::Linear { a } => BranchForm::Linear { a, b: 0.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeOptions {
    pub kappa: f64,
    /// Replaces the form derived from the family.
    pub form: Option<EnvelopeForm>,
    pub samples: usize,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self {
            kappa: crate::scaling::DEFAULT_KAPPA,
            form: None,
            samples: CONTAINMENT_SAMPLES,
        }
    }
}

/// A monotone map of `[0, c)` onto `[0, 1)`: `form` on `[0, c_env)`, then a
/// C¹ quadratic blend reaching 1 at `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub side: Side,
    pub form: EnvelopeForm,
    pub c: f64,
    pub c_env: f64,
    pub c_star: f64,
    pub branches: Vec<Branch>,
}

impl Envelope {
    /// Builds the pieces; `None` if no blend start keeps the map increasing
    /// with slope above 1.
    pub fn new(side: Side, form: EnvelopeForm, c: f64) -> Option<Self> {
        let f = form.branch_form();
        if !(0.0 < c && c <= 1.0) || !(f.derivative(0.5 * c) > 1.0) {
            return None;
        }
        if (f.eval(c) - 1.0).abs() <= 1e-12 {
            return Some(Self {
                side,
                form,
                c,
                c_env: c,
                c_star: c,
                branches: vec![Branch::new(0.0, c, false, f)],
            });
        }
        let mut x0 = 0.5 * c;
        for _ in 0..60 {
            let (y0, d0, len) = (f.eval(x0), f.derivative(x0), c - x0);
            let k = (1.0 - y0 - d0 * len) / (len * len);
            let d_end = d0 + 2.0 * k * len;
            if y0 < 1.0 && d0 > 1.0 && d_end > 1.0 {
                let blend = BranchForm::QuadraticBlend { x0, y0, d0, k };
                return Some(Self {
                    side,
                    form,
                    c,
                    c_env: x0,
                    c_star: x0,
                    branches: vec![Branch::new(0.0, x0, false, f), Branch::new(x0, c, false, blend)],
                });
            }
            x0 *= 0.5;
        }
        None
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.branches.iter().find(|b| b.contains(x)) {
            Some(b) => b.eval(x),
            None => 1.0,
        }
    }

    /// `τ⁻¹(y)` for `y ∈ [0, 1)`; `c` above the range.
    pub fn inverse(&self, y: f64) -> f64 {
        self.branches
            .iter()
            .find_map(|b| {
                let (lo, hi) = b.image();
                (y >= lo && y < hi).then(|| b.inverse(y)).flatten()
            })
            .unwrap_or(self.c)
    }

    /// Log-spaced radii in `(0, c_*)` used to decide `W₂` membership.
    pub fn radii(&self) -> Vec<f64> {
        (0..W2_GRID)
            .map(|k| 0.999 * self.c_star * 10f64.powf(-W2_DECADES * k as f64 / (W2_GRID - 1) as f64))
            .collect()
    }

    /// `T_t(0, ε) ⊃ τ₂(0, ε)` at every membership radius.
    pub fn dominated_by(&self, spec: &RandomMapSpec, p: &ParamPoint) -> bool {
        self.radii().iter().all(|&e| match spec.apply(p, e) {
            Ok(y) => y >= self.eval(e) * (1.0 - 1e-12),
            Err(_) => false,
        })
    }
}

/// Parameters covering the support of `ν`: all atoms, or the admissible
/// corners of the parameter box plus uniform draws.
pub fn support_params(spec: &RandomMapSpec, n: usize, streams: &StreamFactory) -> Vec<ParamPoint> {
    if let Some(atoms) = spec.params.atoms() {
        return atoms;
    }
    let (t0, t1, s0, s1) = spec.params.bounds();
    let corners = [(t0, s0), (t0, s1), (t1, s0), (t1, s1)].map(|(t, s)| ParamPoint::new(t, s));
    let mut out: Vec<ParamPoint> = match &spec.params {
        ParameterSpace::Product { s_atoms, .. } => s_atoms
            .iter()
            .enumerate()
            .flat_map(|(i, &s)| [t0, t1].map(|t| ParamPoint { t, s, atom: Some(i) }))
            .collect(),
        space => corners.into_iter().filter(|p| space.contains(p)).collect(),
    };
    out.extend(
        (0..n).map(|i| spec.params.sample_uniform(&mut streams.substream(Domain::Envelope, i as u64))),
    );
    out
}

fn derived_form(spec: &RandomMapSpec, side: Side, mode: Mode, kappa: f64) -> Result<EnvelopeForm> {
    match (mode, spec.info.near_zero) {
        (Mode::Indifferent, NearZero::Power { m_min, m_max, d_min, .. }) => Ok(match side {
            Side::Lower => EnvelopeForm::Power { m: m_max, d: d_min },
            Side::Upper => EnvelopeForm::Power { m: m_min, d: d_min + kappa },
        }),
        (Mode::Expanding, NearZero::Linear { slope_min, slope_max }) => Ok(match side {
            Side::Lower => EnvelopeForm::Linear { a: slope_max },
            Side::Upper => EnvelopeForm::Linear { a: slope_min },
        }),
        (mode, nz) => Err(Error::InvalidSpec {
            field: "near_zero".into(),
            message: format!("{mode:?} envelopes need a matching near-zero description, found {nz:?}"),
        }),
    }
}

/// Envelope from the family's near-zero data, with sampled containment
/// checks on `(0, c_*)`.
pub fn build_envelope(
    spec: &RandomMapSpec,
    side: Side,
    mode: Mode,
    opts: &EnvelopeOptions,
    streams: &StreamFactory,
) -> Result<Envelope> {
    let form = match opts.form {
        Some(f) => f,
        None => derived_form(spec, side, mode, opts.kappa)?,
    };
    let env = Envelope::new(side, form, spec.a_cut).ok_or_else(|| {
        Error::ConstraintViolation(format!("{form:?} admits no monotone onto extension to [0, {})", spec.a_cut))
    })?;
    let params = support_params(spec, opts.samples, streams);
    let radii = env.radii();
    match side {
        Side::Lower => {
            for (i, p) in params.iter().enumerate() {
                let e = radii[(i * 37) % radii.len()];
                check_lower(spec, &env, p, e)?;
            }
            for &e in &radii {
                for p in params.iter().take(4) {
                    check_lower(spec, &env, p, e)?;
                }
            }
        }
        Side::Upper => {
            if !params.iter().any(|p| env.dominated_by(spec, p)) {
                let p = params[0];
                let e = radii
                    .iter()
                    .copied()
                    .find(|&e| spec.apply(&p, e).map_or(true, |y| y < env.eval(e)))
                    .unwrap_or(env.c_star);
                return Err(Error::ContainmentViolation {
                    param: p.to_string(),
                    eps: e,
                    detail: "no sampled parameter dominates the upper envelope".into(),
                });
            }
        }
    }
    Ok(env)
}

fn check_lower(spec: &RandomMapSpec, env: &Envelope, p: &ParamPoint, e: f64) -> Result<()> {
    let y = spec.apply(p, e)?;
    let bound = env.eval(e);
    if y > bound * (1.0 + 1e-12) {
        return Err(Error::ContainmentViolation {
            param: p.to_string(),
            eps: e,
            detail: format!("T_t(eps) = {y} exceeds tau_1(eps) = {bound}"),
        });
    }
    Ok(())
}

/// The envelope on `[0, c)` and `T_t` on `[c, 1]`.
pub fn assemble_aux_map(spec: &RandomMapSpec, env: &Envelope) -> Result<RandomMapSpec> {
    let family = MapFamily::Aux {
        base: Box::new(spec.family.clone()),
        cut: env.c,
        left: env.branches.clone(),
    };
    let near_zero = match env.form {
        EnvelopeForm::Power { m, d } => NearZero::Power { m_min: m, m_max: m, d_min: d, d_max: d },
        EnvelopeForm::Linear { a } => NearZero::Linear { slope_min: a, slope_max: a },
    };
    let suffix = match env.side {
        Side::Lower => "lower-aux",
        Side::Upper => "upper-aux",
    };
    let aux = RandomMapSpec::new(
        spec.params.clone(),
        family,
        spec.density.clone(),
        spec.a_cut,
        FamilyInfo {
            name: format!("{}-{suffix}", spec.info.name),
            left: spec.info.left,
            near_zero,
            flags: vec![],
            lsv_t: None,
        },
    )?
    .with_dither(spec.dither);
    let report = validate_spec(&aux);
    if let Some(f) = report.failures.first() {
        return Err(Error::ConstraintViolation(format!("auxiliary map: {f}")));
    }
    Ok(aux)
}
