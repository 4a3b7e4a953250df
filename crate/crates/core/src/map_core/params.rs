use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A parameter point `(t, s)`. `atom` indexes the counting-measure factor
/// when the space has one (finite sets, products with a finite `s` set).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub t: f64,
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom: Option<usize>,
}

impl ParamPoint {
    pub fn new(t: f64, s: f64) -> Self {
        Self { t, s, atom: None }
    }
}

impl std::fmt::Display for ParamPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.atom {
            Some(i) => write!(f, "(t={}, s={}, atom={})", self.t, self.s, i),
            None => write!(f, "(t={}, s={})", self.t, self.s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub s: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseMeasure {
    Lebesgue,
    Counting,
}

/// The parameter space `W` with its reference measure `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParameterSpace {
    Singleton {
        t: f64,
        #[serde(default)]
        s: f64,
    },
    /// `[a0,b0] × [a1,b1]`, Lebesgue.
    Rectangle { a0: f64, b0: f64, a1: f64, b1: f64 },
    /// `{(t,s): a0 ≤ t ≤ b0, a0·c0 ≤ s ≤ c0·t}`, Lebesgue.
    Triangle { a0: f64, b0: f64, c0: f64 },
    /// Finitely many atoms, counting measure; weights serve as the default
    /// selection probabilities.
    FiniteSet { atoms: Vec<Atom> },
    /// `t ∈ [a0,b0]` with Lebesgue measure times a finite `s` set with
    /// counting measure.
    Product {
        a0: f64,
        b0: f64,
        s_atoms: Vec<f64>,
    },
}

impl ParameterSpace {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConstraintViolation(m.to_string()));
        match self {
            ParameterSpace::Singleton { t, s } => {
                if !t.is_finite() || !s.is_finite() {
                    return bad("singleton parameter must be finite");
                }
            }
            ParameterSpace::Rectangle { a0, b0, a1, b1 } => {
                if !(1.0 < *a0 && a0 <= b0 && b0.is_finite()) {
                    return bad("rectangle requires 1 < a0 <= b0 < inf");
                }
                if !(1.0 <= *a1 && a1 <= b1 && b1.is_finite()) {
                    return bad("rectangle requires 1 <= a1 <= b1 < inf");
                }
            }
            ParameterSpace::Triangle { a0, b0, c0 } => {
                if !(1.0 < *a0 && a0 <= b0 && b0.is_finite()) {
                    return bad("triangle requires 1 < a0 <= b0 < inf");
                }
                if !(0.0 < *c0 && *c0 < 1.0) {
                    return bad("triangle requires 0 < c0 < 1");
                }
                if a0 * c0 < 1.0 {
                    return bad("triangle requires a0*c0 >= 1");
                }
            }
            ParameterSpace::FiniteSet { atoms } => {
                if atoms.is_empty() {
                    return bad("finite set needs at least one atom");
                }
                if atoms.iter().any(|a| !(a.weight > 0.0)) {
                    return bad("finite-set atoms need strictly positive weights");
                }
            }
            ParameterSpace::Product { a0, b0, s_atoms } => {
                if !(a0 < b0) || !b0.is_finite() {
                    return bad("product requires a0 < b0 < inf");
                }
                if s_atoms.is_empty() {
                    return bad("product needs at least one s atom");
                }
            }
        }
        Ok(())
    }

    /// Measure of the `s` coordinate (`ν1`).
    pub fn s_measure(&self) -> BaseMeasure {
        match self {
            ParameterSpace::Rectangle { .. } | ParameterSpace::Triangle { .. } => {
                BaseMeasure::Lebesgue
            }
            _ => BaseMeasure::Counting,
        }
    }

    pub fn is_singleton(&self) -> bool {
        match self {
            ParameterSpace::Singleton { .. } => true,
            ParameterSpace::FiniteSet { atoms } => atoms.len() == 1,
            _ => false,
        }
    }

    /// `(inf t, sup t, inf s, sup s)` over `W`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match self {
            ParameterSpace::Singleton { t, s } => (*t, *t, *s, *s),
            ParameterSpace::Rectangle { a0, b0, a1, b1 } => (*a0, *b0, *a1, *b1),
            ParameterSpace::Triangle { a0, b0, c0 } => (*a0, *b0, a0 * c0, c0 * b0),
            ParameterSpace::FiniteSet { atoms } => {
                let f = |g: fn(&Atom) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
                    atoms.iter().map(g).fold(init, pick)
                };
                (
                    f(|a| a.t, f64::INFINITY, f64::min),
                    f(|a| a.t, f64::NEG_INFINITY, f64::max),
                    f(|a| a.s, f64::INFINITY, f64::min),
                    f(|a| a.s, f64::NEG_INFINITY, f64::max),
                )
            }
            ParameterSpace::Product { a0, b0, s_atoms } => (
                *a0,
                *b0,
                s_atoms.iter().cloned().fold(f64::INFINITY, f64::min),
                s_atoms.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }

    /// Total `ν(W)`.
    pub fn volume(&self) -> f64 {
        match self {
            ParameterSpace::Singleton { .. } => 1.0,
            ParameterSpace::Rectangle { a0, b0, a1, b1 } => (b0 - a0) * (b1 - a1),
            ParameterSpace::Triangle { a0, b0, c0 } => 0.5 * c0 * (b0 - a0) * (b0 - a0),
            ParameterSpace::FiniteSet { atoms } => atoms.len() as f64,
            ParameterSpace::Product { a0, b0, s_atoms } => (b0 - a0) * s_atoms.len() as f64,
        }
    }

    pub fn contains(&self, p: &ParamPoint) -> bool {
        const TOL: f64 = 1e-12;
        match self {
            ParameterSpace::Singleton { t, s } => p.t == *t && p.s == *s,
            ParameterSpace::Rectangle { a0, b0, a1, b1 } => {
                p.t >= a0 - TOL && p.t <= b0 + TOL && p.s >= a1 - TOL && p.s <= b1 + TOL
            }
            ParameterSpace::Triangle { a0, b0, c0 } => {
                p.t >= a0 - TOL
                    && p.t <= b0 + TOL
                    && p.s >= a0 * c0 - TOL
                    && p.s <= c0 * p.t + TOL
            }
            ParameterSpace::FiniteSet { atoms } => match p.atom {
                Some(i) => atoms.get(i).is_some_and(|a| a.t == p.t && a.s == p.s),
                None => atoms.iter().any(|a| a.t == p.t && a.s == p.s),
            },
            ParameterSpace::Product { a0, b0, s_atoms } => {
                p.t >= a0 - TOL && p.t <= b0 + TOL && s_atoms.iter().any(|s| *s == p.s)
            }
        }
    }

    /// A draw from `ν` normalized to a probability on `W` (uniform proposal).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamPoint {
        match self {
            ParameterSpace::Singleton { t, s } => ParamPoint::new(*t, *s),
            ParameterSpace::Rectangle { a0, b0, a1, b1 } => ParamPoint::new(
                a0 + (b0 - a0) * rng.gen::<f64>(),
                a1 + (b1 - a1) * rng.gen::<f64>(),
            ),
            ParameterSpace::Triangle { a0, b0, c0 } => loop {
                let t = a0 + (b0 - a0) * rng.gen::<f64>();
                let s = a0 * c0 + c0 * (b0 - a0) * rng.gen::<f64>();
                if s <= c0 * t {
                    break ParamPoint::new(t, s);
                }
            },
            ParameterSpace::FiniteSet { atoms } => {
                let i = rng.gen_range(0..atoms.len());
                ParamPoint {
                    t: atoms[i].t,
                    s: atoms[i].s,
                    atom: Some(i),
                }
            }
            ParameterSpace::Product { a0, b0, s_atoms } => {
                let i = rng.gen_range(0..s_atoms.len());
                ParamPoint {
                    t: a0 + (b0 - a0) * rng.gen::<f64>(),
                    s: s_atoms[i],
                    atom: Some(i),
                }
            }
        }
    }

    /// Atoms as parameter points (finite sets only).
    pub fn atoms(&self) -> Option<Vec<ParamPoint>> {
        match self {
            ParameterSpace::Singleton { t, s } => Some(vec![ParamPoint::new(*t, *s)]),
            ParameterSpace::FiniteSet { atoms } => Some(
                atoms
                    .iter()
                    .enumerate()
                    .map(|(i, a)| ParamPoint {
                        t: a.t,
                        s: a.s,
                        atom: Some(i),
                    })
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Quadrature rule `(point, ν-weight)` integrating polynomials in `(t,s)`
    /// of moderate degree exactly over `W`.
    pub fn quadrature(&self, order: usize) -> Vec<(ParamPoint, f64)> {
        let (gx, gw) = gauss_legendre(order);
        let on = |a: f64, b: f64| -> Vec<(f64, f64)> {
            gx.iter()
                .zip(&gw)
                .map(|(x, w)| (0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w))
                .collect()
        };
        match self {
            ParameterSpace::Singleton { t, s } => vec![(ParamPoint::new(*t, *s), 1.0)],
            ParameterSpace::Rectangle { a0, b0, a1, b1 } => {
                let mut out = Vec::new();
                for (t, wt) in on(*a0, *b0) {
                    for (s, ws) in on(*a1, *b1) {
                        out.push((ParamPoint::new(t, s), wt * ws));
                    }
                }
                out
            }
            ParameterSpace::Triangle { a0, b0, c0 } => {
                let mut out = Vec::new();
                for (t, wt) in on(*a0, *b0) {
                    for (s, ws) in on(a0 * c0, c0 * t) {
                        out.push((ParamPoint::new(t, s), wt * ws));
                    }
                }
                out
            }
            ParameterSpace::FiniteSet { .. } => self
                .atoms()
                .unwrap_or_default()
                .into_iter()
                .map(|p| (p, 1.0))
                .collect(),
            ParameterSpace::Product { a0, b0, s_atoms } => {
                let mut out = Vec::new();
                for (t, wt) in on(*a0, *b0) {
                    for (i, s) in s_atoms.iter().enumerate() {
                        out.push((
                            ParamPoint {
                                t,
                                s: *s,
                                atom: Some(i),
                            },
                            wt,
                        ));
                    }
                }
                out
            }
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}
