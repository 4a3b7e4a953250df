//! Near-zero scaling of `μ([0, ε])`: theorem predictions, exponent fits and a
//! finite/infinite mass heuristic.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_core::{BaseMeasure, LeftClass, ParameterSpace, RandomMapSpec};
use crate::par;
use crate::profile::{decades, MeasureProfile};
use crate::rng::{Domain, StreamFactory};

pub const DEFAULT_KAPPA: f64 = 0.01;
pub const MIN_FIT_POINTS: usize = 6;
pub const MAX_REL_STDERR: f64 = 0.3;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const MIN_SPAN_DECADES: f64 = 3.0;
pub const FLAT_ALPHA: f64 = 0.05;
pub const CAUCHY_TOL: f64 = 0.2;
const BOOTSTRAP_SEED: u64 = 0x5ca1e;

/// Ordinary least squares `y = slope·x + intercept`.
pub fn ols(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let w: Vec<(f64, f64, f64)> = pts.iter().map(|&(x, y)| (x, y, 1.0)).collect();
    wls(&w)
}

/// Weighted least squares over `(x, y, weight)`.
pub fn wls(pts: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    if pts.len() < 2 || sw <= 0.0 {
        return None;
    }
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Infinite,
    /// `ε^α / (−log ε)`, indifferent branches, Lebesgue `ν1`.
    PowerLog,
    /// `ε^α`, indifferent branches, counting `ν1`.
    Power,
    /// `ε^α / (−log ε)`, expanding branches, Lebesgue `ν1`.
    ExpandingLog,
    /// `ε^α`, expanding branches, counting `ν1`.
    ExpandingPower,
    /// `x + x^t mod 1`: `ε^(2−t)`, or infinite for `t ≥ 2`.
    LsvIntro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremPrediction {
    pub regime: Regime,
    /// `None` when the mass near 0 is infinite.
    pub exponent: Option<f64>,
    pub log_correction: bool,
    /// How far the true exponent may sit above `exponent`.
    pub kappa_slack: f64,
}

impl TheoremPrediction {
    pub fn is_infinite(&self) -> bool {
        self.exponent.is_none()
    }

    /// Fit band `[α − tol, α + κ + tol]`.
    pub fn band(&self, tol: f64) -> Option<(f64, f64)> {
        self.exponent.map(|a| (a - tol, a + self.kappa_slack + tol))
    }
}

/// What the theorems look at: the smallest exponents of the two branches,
/// the measure on the `s` coordinate and the left-branch class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeInputs {
    pub a0: f64,
    pub a1: f64,
    pub measure: BaseMeasure,
    pub left: LeftClass,
    /// `a0` is selected with positive probability, so the slack vanishes.
    pub a0_is_atom: bool,
    pub lsv_t: Option<f64>,
}

impl RegimeInputs {
    pub fn of(spec: &RandomMapSpec) -> Result<Self> {
        let name = spec.info.name.as_str();
        let (a0, _, a1, _) = spec.params.bounds();
        let a0_is_atom = matches!(
            spec.params,
            ParameterSpace::Singleton { .. } | ParameterSpace::FiniteSet { .. }
        );
        let base = Self {
            a0,
            a1,
            measure: spec.params.s_measure(),
            left: spec.info.left,
            a0_is_atom,
            lsv_t: spec.info.lsv_t,
        };
        match name {
            "example-1.1" | "example-1.2" | "example-7.1" | "example-1.1-member"
            | "example-1.2-member" | "intro-root" | "lsv-mod1" => Ok(base),
            // the t = 2, s = 1 member of example 1.2
            "doubling" => Ok(Self { a0: 2.0, a1: 1.0, ..base }),
            other => Err(Error::UnknownRegime(format!(
                "`{other}` does not declare branch exponents of the supported form"
            ))),
        }
    }
}

pub fn predict(spec: &RandomMapSpec) -> Result<TheoremPrediction> {
    predict_with(spec, DEFAULT_KAPPA)
}

pub fn predict_with(spec: &RandomMapSpec, kappa: f64) -> Result<TheoremPrediction> {
    predict_from(&RegimeInputs::of(spec)?, kappa)
}

pub fn predict_from(inp: &RegimeInputs, kappa: f64) -> Result<TheoremPrediction> {
    if let Some(t) = inp.lsv_t {
        return Ok(TheoremPrediction {
            regime: if t >= 2.0 { Regime::Infinite } else { Regime::LsvIntro },
            exponent: (t < 2.0).then_some(2.0 - t),
            log_correction: false,
            kappa_slack: 0.0,
        });
    }
    let lebesgue = inp.measure == BaseMeasure::Lebesgue;
    match inp.left {
        LeftClass::Indifferent => {
            if inp.a0 >= inp.a1 + 1.0 {
                return Ok(TheoremPrediction {
                    regime: Regime::Infinite,
                    exponent: None,
                    log_correction: false,
                    kappa_slack: 0.0,
                });
            }
            Ok(TheoremPrediction {
                regime: if lebesgue { Regime::PowerLog } else { Regime::Power },
                exponent: Some(inp.a1 + 1.0 - inp.a0),
                log_correction: lebesgue,
                kappa_slack: if inp.a0_is_atom { 0.0 } else { kappa },
            })
        }
        LeftClass::Expanding => Ok(TheoremPrediction {
            regime: if lebesgue { Regime::ExpandingLog } else { Regime::ExpandingPower },
            exponent: Some(inp.a1),
            log_correction: lebesgue,
            kappa_slack: 0.0,
        }),
        LeftClass::Unknown => Err(Error::UnknownRegime(
            "left branch is neither indifferent nor expanding at 0".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub alpha: f64,
    pub with_log: bool,
    pub intercept: f64,
    /// Root-mean-square residual of `log μ̂`.
    pub rmse: f64,
    pub ci95: (f64, f64),
    /// `segments` or `parametric`.
    pub bootstrap: String,
    pub eps_used: Vec<f64>,
}

impl ScalingFit {
    /// Fitted `log μ(ε)`.
    pub fn predict_log(&self, eps: f64) -> f64 {
        let off = if self.with_log { -(-eps.ln()).ln() } else { 0.0 };
        self.alpha * eps.ln() + off + self.intercept
    }
}

struct Design {
    idx: Vec<usize>,
    x: Vec<f64>,
    offset: Vec<f64>,
    w: Vec<f64>,
}

fn design(p: &MeasureProfile, with_log: bool, max_rel: f64) -> Result<Design> {
    let mut idx: Vec<usize> = (0..p.len())
        .filter(|&i| {
            let (e, m, s) = (p.eps[i], p.mu_hat[i], p.stderr[i]);
            e > 0.0 && m > 0.0 && m.is_finite() && s / m < max_rel && (!with_log || e < 1.0)
        })
        .collect();
    if idx.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints { got: idx.len(), need: MIN_FIT_POINTS });
    }
    idx.sort_by(|&a, &b| p.eps[a].total_cmp(&p.eps[b]));
    for w in idx.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let slack = 3.0 * p.stderr[lo].hypot(p.stderr[hi]) + 1e-12 * p.mu_hat[hi];
        if p.mu_hat[lo] > p.mu_hat[hi] + slack {
            return Err(Error::DegenerateProfile { eps: p.eps[lo] });
        }
    }
    let rel: Vec<f64> = idx.iter().map(|&i| (p.stderr[i] / p.mu_hat[i]).powi(2)).collect();
    let floor = rel.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let w = rel
        .iter()
        .map(|&v| if floor.is_finite() { 1.0 / v.max(floor) } else { 1.0 })
        .collect();
    Ok(Design {
        x: idx.iter().map(|&i| p.eps[i].ln()).collect(),
        offset: idx
            .iter()
            .map(|&i| if with_log { (-p.eps[i].ln()).ln() } else { 0.0 })
            .collect(),
        idx,
        w,
    })
}

fn solve(d: &Design, mu: impl Fn(usize) -> f64) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64, f64)> = (0..d.idx.len())
        .map(|k| (d.x[k], mu(d.idx[k]).ln() + d.offset[k], d.w[k]))
        .collect();
    if pts.iter().any(|p| !p.1.is_finite()) {
        return None;
    }
    wls(&pts)
}

pub fn fit_exponent(profile: &MeasureProfile, with_log: bool) -> Result<ScalingFit> {
    fit_exponent_seeded(profile, with_log, &StreamFactory::new(BOOTSTRAP_SEED))
}

/// Weighted fit of `log μ̂ = α log ε − [log(−log ε)] + c` over points with
/// relative error below 0.3, weights `1/(stderr/μ̂)²`.
pub fn fit_exponent_seeded(
    profile: &MeasureProfile,
    with_log: bool,
    streams: &StreamFactory,
) -> Result<ScalingFit> {
    fit_with(profile, with_log, MAX_REL_STDERR, streams)
}

fn fit_with(
    profile: &MeasureProfile,
    with_log: bool,
    max_rel: f64,
    streams: &StreamFactory,
) -> Result<ScalingFit> {
    let d = design(profile, with_log, max_rel)?;
    let (alpha, intercept) =
        solve(&d, |i| profile.mu_hat[i]).ok_or(Error::DegenerateProfile { eps: profile.eps[d.idx[0]] })?;
    let n = d.idx.len() as f64;
    let rmse = (d
        .idx
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let fit = alpha * d.x[k] - d.offset[k] + intercept;
            (profile.mu_hat[i].ln() - fit).powi(2)
        })
        .sum::<f64>()
        / n)
        .sqrt();

    let segments = profile.segment_means.as_ref().filter(|s| s.len() >= 2);
    let kind = if segments.is_some() { "segments" } else { "parametric" };
    let reps: Vec<Option<f64>> = par::map_indexed(BOOTSTRAP_RESAMPLES, |r| {
        let mut rng = streams.substream(Domain::Bootstrap, r as u64);
        let resampled: Vec<f64> = match segments {
            Some(seg) => {
                let k = seg.len();
                let mut acc = vec![0.0; profile.len()];
                for _ in 0..k {
                    let row = &seg[rng.gen_range(0..k)];
                    for (a, v) in acc.iter_mut().zip(row) {
                        *a += v / k as f64;
                    }
                }
                acc
            }
            None => (0..profile.len())
                .map(|i| {
                    let z: f64 = rng.sample(StandardNormal);
                    profile.mu_hat[i] * (z * profile.stderr[i] / profile.mu_hat[i]).exp()
                })
                .collect(),
        };
        solve(&d, |i| resampled[i]).map(|(a, _)| a)
    });
    let mut alphas: Vec<f64> = reps.into_iter().flatten().collect();
    alphas.sort_by(f64::total_cmp);
    let ci95 = if alphas.is_empty() {
        (alpha, alpha)
    } else {
        let q = |p: f64| alphas[((alphas.len() - 1) as f64 * p).round() as usize];
        (q(0.025).min(alpha), q(0.975).max(alpha))
    };
    Ok(ScalingFit {
        alpha,
        with_log,
        intercept,
        rmse,
        ci95,
        bootstrap: kind.into(),
        eps_used: d.idx.iter().map(|&i| profile.eps[i]).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassVerdict {
    InfiniteMassEvidence,
    FiniteMassEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: MassVerdict,
    pub fit: ScalingFit,
    /// Largest relative gap between `μ̂` and its estimate from a prefix of the
    /// segments (1/8, 1/4, 1/2) over the two smallest decades of `ε`; `None`
    /// when the profile carries neither segments nor a half-sample column.
    pub cauchy_change: Option<f64>,
    /// No point met the relative-error bound, so the flatness fit used every
    /// positive point.
    pub noise_limited: bool,
    pub prediction: Option<TheoremPrediction>,
    pub agrees_with_prediction: Option<bool>,
}

/// Estimates from the first 1/8, 1/4 and 1/2 of the segments, or just the
/// half-sample column when no segments are stored.
fn prefix_estimates(profile: &MeasureProfile) -> Vec<Vec<f64>> {
    match &profile.segment_means {
        Some(segs) if segs.len() >= 8 => [8, 4, 2]
            .iter()
            .map(|d| {
                let head = &segs[..segs.len() / d];
                (0..profile.len())
                    .map(|i| head.iter().map(|m| m[i]).sum::<f64>() / head.len() as f64)
                    .collect()
            })
            .collect(),
        _ => profile.mu_hat_half.iter().cloned().collect(),
    }
}

/// Heuristic: a flat fit (`α < 0.05`) whose small-`ε` values still move by
/// more than 20% as the sample grows points to infinite mass.
pub fn classify_finiteness(
    profile: &MeasureProfile,
    prediction: Option<&TheoremPrediction>,
) -> Result<Classification> {
    let span = decades(&profile.eps);
    if !(span >= MIN_SPAN_DECADES) {
        return Err(Error::InsufficientSpan { decades: span, need: MIN_SPAN_DECADES });
    }
    let (fit, noise_limited) = match fit_exponent(profile, false) {
        Ok(f) => (f, false),
        Err(Error::InsufficientPoints { .. }) => (
            fit_with(profile, false, f64::INFINITY, &StreamFactory::new(BOOTSTRAP_SEED))?,
            true,
        ),
        Err(e) => return Err(e),
    };
    let eps_min = profile.eps.iter().copied().fold(f64::INFINITY, f64::min);
    let prefixes = prefix_estimates(profile);
    let cauchy_change = (!prefixes.is_empty()).then(|| {
        (0..profile.len())
            .filter(|&i| profile.eps[i] <= eps_min * 100.0 * (1.0 + 1e-9) && profile.mu_hat[i] > 0.0)
            .flat_map(|i| prefixes.iter().map(move |p| (p[i] - profile.mu_hat[i]).abs() / profile.mu_hat[i]))
            .fold(0.0, f64::max)
    });
    let infinite = fit.alpha < FLAT_ALPHA && cauchy_change.map_or(true, |c| c > CAUCHY_TOL);
    Ok(Classification {
        verdict: if infinite {
            MassVerdict::InfiniteMassEvidence
        } else {
            MassVerdict::FiniteMassEvidence
        },
        fit,
        cauchy_change,
        noise_limited,
        prediction: prediction.cloned(),
        agrees_with_prediction: prediction.map(|p| p.is_infinite() == infinite),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_core::{builtin_family, FamilyParams};
    use crate::profile::parse_eps_grid;

    fn fam(name: &str, fp: FamilyParams) -> RandomMapSpec {
        builtin_family(name, &fp).unwrap()
    }

    #[test]
    fn synthetic_fits_are_exact() {
        let eps = parse_eps_grid("2^-4..2^-16:geometric").unwrap();
        let f = fit_exponent(&MeasureProfile::synthetic(&eps, |e| e * e), false).unwrap();
        assert!((f.alpha - 2.0).abs() < 1e-9 && f.rmse < 1e-9);
        let g = MeasureProfile::synthetic(&eps, |e| e / -e.ln());
        let f = fit_exponent(&g, true).unwrap();
        assert!((f.alpha - 1.0).abs() < 1e-9 && f.rmse < 1e-9);
        assert!(f.ci95.0 <= f.alpha && f.alpha <= f.ci95.1);
    }

    #[test]
    fn predictions() {
        let fp = FamilyParams::default().with("a0", 1.5).with("c0", 0.8);
        let p = predict(&fam("example-1.1", fp)).unwrap();
        assert_eq!(p.regime, Regime::PowerLog);
        assert!((p.exponent.unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(p.kappa_slack, DEFAULT_KAPPA);

        let p = predict(&fam("lsv-mod1", FamilyParams::default().with("t", 2.0))).unwrap();
        assert!(p.is_infinite());

        let p = predict(&fam("intro-root", FamilyParams::default().with("s", 2.0))).unwrap();
        assert_eq!(p.regime, Regime::ExpandingPower);
        assert_eq!(p.exponent, Some(2.0));

        let fp = FamilyParams::default().with("a0", 2.4).with("c0", 0.5);
        assert!(predict(&fam("example-1.1", fp)).unwrap().is_infinite());
        assert!(matches!(predict(&fam("identity", FamilyParams::default())), Err(Error::UnknownRegime(_))));
    }

    #[test]
    fn counting_drops_only_the_log() {
        let tri = FamilyParams::default().with("a0", 1.5).with("c0", 0.8);
        let mut fin = tri.clone();
        fin.s_values = Some(vec![1.2, 1.4]);
        for name in ["example-1.1", "example-1.2"] {
            let a = predict(&fam(name, tri.clone())).unwrap();
            let b = predict(&fam(name, fin.clone())).unwrap();
            assert!((a.exponent.unwrap() - b.exponent.unwrap()).abs() < 1e-12);
            assert!(a.log_correction && !b.log_correction);
        }
    }

    #[test]
    fn fit_guards() {
        let eps = [0.5, 0.25, 0.125];
        let p = MeasureProfile::synthetic(&eps, |e| e);
        assert!(matches!(fit_exponent(&p, false), Err(Error::InsufficientPoints { .. })));
        let eps = parse_eps_grid("2^-2..2^-10:geometric:2").unwrap();
        let p = MeasureProfile::synthetic(&eps, |e| 1.0 / e);
        assert!(matches!(fit_exponent(&p, false), Err(Error::DegenerateProfile { .. })));
        let p = MeasureProfile::synthetic(&eps, |e| e);
        assert!(matches!(classify_finiteness(&p, None), Err(Error::InsufficientSpan { .. })));
    }

    #[test]
    fn flat_and_unsettled_means_infinite() {
        let eps = parse_eps_grid("2^-4..2^-16:geometric").unwrap();
        let mut p = MeasureProfile::synthetic(&eps, |e| 10.0 + e);
        p.mu_hat_half = Some(p.mu_hat.iter().map(|m| m * 0.6).collect());
        let c = classify_finiteness(&p, None).unwrap();
        assert_eq!(c.verdict, MassVerdict::InfiniteMassEvidence);
        p.mu_hat_half = Some(p.mu_hat.clone());
        let c = classify_finiteness(&p, None).unwrap();
        assert_eq!(c.verdict, MassVerdict::FiniteMassEvidence);
    }
}
