use rand::Rng;

use crate::error::{Error, Result};
use crate::map_core::{MarkovStep, ParamPoint, ParameterSpace, RandomMapSpec};
use crate::par;
use crate::rng::{Domain, Stream, StreamFactory};
use crate::transfer::DensityVector;

use super::envelope::Envelope;

pub const P_HAT_GRID: usize = 1024;
/// Midpoint cells per continuous parameter coordinate.
pub const P_HAT_NODES: usize = 256;

/// `p̂` cached on [`P_HAT_GRID`] equal cells of `[0, c]`; 1 on `(c, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PHat {
    pub c: f64,
    pub values: Vec<f64>,
}

impl PHat {
    pub fn from_fn(c: f64, f: impl Fn(f64) -> f64) -> Self {
        let w = c / P_HAT_GRID as f64;
        Self {
            c,
            values: (0..P_HAT_GRID).map(|k| f((k as f64 + 0.5) * w)).collect(),
        }
    }

    pub fn constant(c: f64, v: f64) -> Self {
        Self::from_fn(c, |_| v)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x > self.c {
            return 1.0;
        }
        let k = ((x / self.c) * P_HAT_GRID as f64) as usize;
        self.values[k.min(P_HAT_GRID - 1)]
    }

    /// `inf p̂` over cells meeting `[0, r)`.
    pub fn inf_below(&self, r: f64) -> f64 {
        let n = ((r / self.c) * P_HAT_GRID as f64).ceil() as usize;
        self.values[..n.clamp(1, P_HAT_GRID)].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `∫_{W₂(τ₂)} p(t, x) ν(dt)` with `W₂` decided by [`Envelope::dominated_by`]:
    /// exact over atoms, a midpoint rule on [`P_HAT_NODES`] cells per
    /// continuous coordinate otherwise.
    pub fn for_envelope(spec: &RandomMapSpec, env: &Envelope) -> Result<Self> {
        let nodes: Vec<(ParamPoint, f64)> = match spec.params.atoms() {
            Some(atoms) => atoms.into_iter().map(|p| (p, 1.0)).collect(),
            None => midpoint_nodes(&spec.params),
        };
        let member = par::map_indexed(nodes.len(), |i| env.dominated_by(spec, &nodes[i].0));
        if !member.iter().any(|m| *m) {
            return Err(Error::DivideByZero { x: 0.0 });
        }
        let singleton = matches!(spec.params, ParameterSpace::Singleton { .. });
        let at = |x: f64| {
            let (mut num, mut den) = (0.0, 0.0);
            for ((p, area), &m) in nodes.iter().zip(&member) {
                let q = if singleton { 1.0 } else { area * spec.density.eval_in(&spec.params, p, x).max(0.0) };
                den += q;
                if m {
                    num += q;
                }
            }
            if den > 0.0 { num / den } else { 0.0 }
        };
        if spec.density.depends_on_x() {
            let w = env.c / P_HAT_GRID as f64;
            let values = par::map_indexed(P_HAT_GRID, |k| at((k as f64 + 0.5) * w));
            Ok(Self { c: env.c, values })
        } else {
            Ok(Self::constant(env.c, at(0.0)))
        }
    }
}

fn midpoint_nodes(space: &ParameterSpace) -> Vec<(ParamPoint, f64)> {
    let (t0, t1, s0, s1) = space.bounds();
    let mid = |lo: f64, hi: f64, n: usize, k: usize| lo + (hi - lo) * (k as f64 + 0.5) / n as f64;
    match space {
        ParameterSpace::Product { s_atoms, .. } => {
            let n = P_HAT_NODES * P_HAT_NODES;
            let dt = (t1 - t0) / n as f64;
            (0..n)
                .flat_map(|k| {
                    s_atoms.iter().enumerate().map(move |(i, &s)| {
                        (ParamPoint { t: mid(t0, t1, n, k), s, atom: Some(i) }, dt)
                    })
                })
                .collect()
        }
        _ => {
            let n = P_HAT_NODES;
            let area = (t1 - t0) * (s1 - s0) / (n * n) as f64;
            (0..n * n)
                .map(|k| ParamPoint::new(mid(t0, t1, n, k / n), mid(s0, s1, n, k % n)))
                .filter(|p| space.contains(p))
                .map(|p| (p, area))
                .collect()
        }
    }
}

/// `Υ = {T, id; p̂(x), 1 − p̂(x)}`.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub base: RandomMapSpec,
    pub p_hat: PHat,
}

impl MixtureSpec {
    pub fn new(base: RandomMapSpec, p_hat: PHat) -> Self {
        Self { base, p_hat }
    }
}

impl MarkovStep for MixtureSpec {
    fn step(&self, x: f64, rng: &mut Stream) -> Result<f64> {
        if rng.gen::<f64>() < self.p_hat.eval(x) {
            self.base.step(x, rng)
        } else {
            Ok(x)
        }
    }

    fn outcomes(&self, x: f64) -> Option<Result<Vec<(f64, f64)>>> {
        let q = self.p_hat.eval(x);
        Some(self.base.outcomes(x)?.map(|mut v| {
            v.iter_mut().for_each(|o| o.0 *= q);
            if q < 1.0 {
                v.push((1.0 - q, x));
            }
            v
        }))
    }
}

/// Monte Carlo `P_Υ(x, [lo, hi])` with its standard error.
pub fn mixture_transition(
    mix: &MixtureSpec,
    x: f64,
    d: (f64, f64),
    samples: usize,
    rng: &mut Stream,
) -> Result<(f64, f64)> {
    let inside = |y: f64| y >= d.0 && y <= d.1;
    let mut hits = 0usize;
    for _ in 0..samples {
        if inside(mix.base.step(x, rng)?) {
            hits += 1;
        }
    }
    let q = mix.p_hat.eval(x);
    let f = hits as f64 / samples as f64;
    let stay = if inside(x) { 1.0 - q } else { 0.0 };
    Ok((q * f + stay, q * (f * (1.0 - f) / samples as f64).sqrt()))
}

/// `h / p̂` per bin and its total mass.
pub fn lemma21_transform(h: &DensityVector, p_hat: &PHat) -> Result<(DensityVector, f64)> {
    let grid = h.grid;
    let mut values = Vec::with_capacity(h.values.len());
    for (i, v) in h.values.iter().enumerate() {
        let x = 0.5 * (grid.left(i) + grid.right(i));
        let q = p_hat.eval(x);
        if !(q > 0.0) {
            return Err(Error::DivideByZero { x });
        }
        values.push(v / q);
    }
    let out = DensityVector::from_values(values)?;
    let mass = out.mass();
    Ok((out, mass))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStepCheck {
    pub x: f64,
    pub monte_carlo: f64,
    pub mc_stderr: f64,
    pub closed_form: f64,
    pub cf_stderr: f64,
}

impl TwoStepCheck {
    pub fn within(&self, sigmas: f64) -> bool {
        let se = self.mc_stderr.hypot(self.cf_stderr);
        (self.monte_carlo - self.closed_form).abs() <= sigmas * se + 1e-12
    }
}

/// Two Υ-steps from `x ∈ [c, 1]` (through `[0, c)` into `[0, ε]`) against
/// `∫ p(t₀,x){p̂(T x)·1[T x ≤ τ₂⁻¹(ε)] + (1 − p̂(T x))·1[T x ≤ ε]} ν(dt₀)`.
/// `mix.base` must be the upper auxiliary map of `env`. The closed form is
/// integrated exactly over atoms and by independent draws of `t₀` otherwise.
pub fn two_step_identity(
    mix: &MixtureSpec,
    env: &Envelope,
    x: f64,
    eps: f64,
    samples: usize,
    streams: &StreamFactory,
) -> Result<TwoStepCheck> {
    let spec = &mix.base;
    let c = env.c;
    let pre = env.inverse(eps);
    let integrand = |y: f64| {
        let q = mix.p_hat.eval(y);
        q * f64::from(u8::from(y <= pre)) + (1.0 - q) * f64::from(u8::from(y <= eps))
    };

    let mut rng = streams.substream(Domain::Mixture, 1 << 32);
    let mut hits = 0usize;
    for _ in 0..samples {
        let y1 = mix.step(x, &mut rng)?;
        if y1 < c && mix.step(y1, &mut rng)? <= eps {
            hits += 1;
        }
    }
    let f = hits as f64 / samples as f64;
    let mc_stderr = (f * (1.0 - f) / samples as f64).sqrt();

    let (closed_form, cf_stderr) = match spec.outcomes(x) {
        Some(out) => (out?.iter().map(|&(w, y)| w * integrand(y)).sum(), 0.0),
        None => {
            let mut rng = streams.substream(Domain::Mixture, (1 << 32) + 1);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..samples {
                let p = spec.sample_parameter(x, &mut rng)?;
                let v = integrand(spec.apply(&p, x)?);
                s += v;
                s2 += v * v;
            }
            let n = samples as f64;
            let m = s / n;
            (m, ((s2 / n - m * m).max(0.0) / n).sqrt())
        }
    };
    Ok(TwoStepCheck { x, monte_carlo: f, mc_stderr, closed_form, cf_stderr })
}
