//! Built-in map families.

use serde::{Deserialize, Serialize};

use super::branch::{example11_coefficient, Branch, BranchForm};
use super::density::SelectionDensity;
use super::params::ParameterSpace;
use super::spec::{FamilyInfo, LeftClass, MapFamily, NearZero, RandomMapSpec};
use crate::error::{Error, Result};

pub const FAMILY_NAMES: &[&str] = &[
    "example-1.1",
    "example-1.2",
    "example-7.1",
    "lsv-mod1",
    "intro-root",
    "example-1.1-member",
    "example-1.2-member",
    "doubling",
    "identity",
];

/// Numeric knobs of the built-in families. Unset fields take family defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Replace the triangle by `[a0,b0] × {s_values}` with counting measure on `s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_weights: Option<Vec<f64>>,
    /// `uniform` (default) or `position` (the x-dependent affine density).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
}

impl FamilyParams {
    pub fn with(mut self, key: &str, v: f64) -> Self {
        match key {
            "a0" => self.a0 = Some(v),
            "b0" => self.b0 = Some(v),
            "c0" => self.c0 = Some(v),
            "a1" => self.a1 = Some(v),
            "b1" => self.b1 = Some(v),
            "t" => self.t = Some(v),
            "s" => self.s = Some(v),
            _ => panic!("unknown family parameter {key}"),
        }
        self
    }
}

fn violation(msg: impl Into<String>) -> Error {
    Error::ConstraintViolation(msg.into())
}

/// Solves `x + x^t = 1` on `(0, 1)`.
pub fn lsv_cut(t: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + mid.powf(t) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn range_over(a: f64, b: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    (0..=256)
        .map(|k| f(a + (b - a) * k as f64 / 256.0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Builds one of [`FAMILY_NAMES`].
pub fn builtin_family(name: &str, fp: &FamilyParams) -> Result<RandomMapSpec> {
    match name {
        "example-1.1" | "example-1.2" => example1x(name, fp),
        "example-1.1-member" | "example-1.2-member" => {
            let t = fp.t.unwrap_or(2.0);
            let s = fp.s.unwrap_or(1.5);
            if !(t > 1.0) {
                return Err(violation("member requires t > 1"));
            }
            if !(s >= 1.0) {
                return Err(violation("member requires s >= 1"));
            }
            let indifferent = name == "example-1.1-member";
            let (family, near_zero) = if indifferent {
                let m = example11_coefficient(t);
                (
                    MapFamily::Example11,
                    NearZero::Power { m_min: m, m_max: m, d_min: t, d_max: t },
                )
            } else {
                let k = t / (t - 1.0);
                (MapFamily::Example12, NearZero::Linear { slope_min: k, slope_max: k })
            };
            RandomMapSpec::new(
                ParameterSpace::Singleton { t, s },
                family,
                SelectionDensity::constant(1.0),
                (t - 1.0) / t,
                FamilyInfo {
                    name: name.into(),
                    left: if indifferent { LeftClass::Indifferent } else { LeftClass::Expanding },
                    near_zero,
                    flags: vec![],
                    lsv_t: None,
                },
            )
        }
        "example-7.1" => {
            let a0 = fp.a0.unwrap_or(1.5);
            let b0 = fp.b0.unwrap_or(a0 + 1.0);
            let a1 = fp.a1.unwrap_or(1.5);
            let b1 = fp.b1.unwrap_or(2.5);
            if !(1.0 < a0 && a0 < b0) {
                return Err(violation("example-7.1 requires 1 < a0 < b0"));
            }
            if !(1.0 < a1 && a1 < b1 && b1 < 3.0) {
                return Err(violation("example-7.1 requires 1 < a1 < b1 < 3"));
            }
            let space = ParameterSpace::Rectangle { a0, b0, a1, b1 };
            let (m_min, m_max) = range_over(a0, b0, |t| 0.25 * (4.0f64 / 3.0).powf(t));
            let density = SelectionDensity::uniform_on(&space);
            RandomMapSpec::new(
                space,
                MapFamily::Example71,
                density,
                0.75,
                FamilyInfo {
                    name: name.into(),
                    left: LeftClass::Indifferent,
                    near_zero: NearZero::Power { m_min, m_max, d_min: a0, d_max: b0 },
                    flags: vec![],
                    lsv_t: None,
                },
            )
        }
        "lsv-mod1" => {
            let t = fp.t.unwrap_or(1.5);
            if !(t > 1.0) {
                return Err(violation("lsv-mod1 requires t > 1"));
            }
            let mut flags = vec![];
            if t >= 2.0 {
                flags.push("infinite invariant mass near 0".to_string());
            }
            RandomMapSpec::new(
                ParameterSpace::Singleton { t, s: 1.0 },
                MapFamily::LsvMod1 { cut: lsv_cut(t) },
                SelectionDensity::constant(1.0),
                lsv_cut(t),
                FamilyInfo {
                    name: name.into(),
                    left: LeftClass::Indifferent,
                    near_zero: NearZero::Power { m_min: 1.0, m_max: 1.0, d_min: t, d_max: t },
                    flags,
                    lsv_t: Some(t),
                },
            )
        }
        "intro-root" => {
            let s = fp.s.unwrap_or(2.0);
            if s > 4.0 {
                return Err(violation(
                    "intro-root requires 1 < s < 4 (s > 4 makes 1 an attracting fixed point)",
                ));
            }
            if s == 4.0 {
                return Err(violation(
                    "intro-root requires 1 < s < 4 (s = 4 makes 1 an indifferent fixed point)",
                ));
            }
            if !(s > 1.0) {
                return Err(violation("intro-root requires 1 < s < 4"));
            }
            let k = 4.0 / 3.0;
            RandomMapSpec::new(
                ParameterSpace::Singleton { t: k, s },
                MapFamily::IntroRoot,
                SelectionDensity::constant(1.0),
                0.75,
                FamilyInfo {
                    name: name.into(),
                    left: LeftClass::Expanding,
                    near_zero: NearZero::Linear { slope_min: k, slope_max: k },
                    flags: vec![],
                    lsv_t: None,
                },
            )
        }
        "doubling" => {
            let mut spec = RandomMapSpec::deterministic(
                name,
                vec![
                    Branch::new(0.0, 0.5, false, BranchForm::Linear { a: 2.0, b: 0.0 }),
                    Branch::new(0.5, 1.0, true, BranchForm::Linear { a: 2.0, b: -1.0 }),
                ],
                0.5,
            )?;
            spec.info.left = LeftClass::Expanding;
            spec.info.near_zero = NearZero::Linear { slope_min: 2.0, slope_max: 2.0 };
            Ok(spec.with_dither(true))
        }
        "identity" => RandomMapSpec::deterministic(
            name,
            vec![Branch::new(0.0, 1.0, true, BranchForm::Linear { a: 1.0, b: 0.0 })],
            0.5,
        ),
        other => Err(Error::InvalidSpec {
            field: "family.name".into(),
            message: format!("unknown family `{other}`; expected one of {FAMILY_NAMES:?}"),
        }),
    }
}

fn example1x(name: &str, fp: &FamilyParams) -> Result<RandomMapSpec> {
    let a0 = fp.a0.unwrap_or(1.5);
    let b0 = fp.b0.unwrap_or(a0 + 1.0);
    let c0 = fp.c0.unwrap_or(0.8);
    if !(1.0 < a0 && a0 < b0) {
        return Err(violation(format!("{name} requires 1 < a0 < b0")));
    }
    let indifferent = name == "example-1.1";
    let (space, density) = match &fp.s_values {
        Some(values) => {
            if values.is_empty() || values.iter().any(|s| !(*s >= 1.0)) {
                return Err(violation("s_values must be non-empty and >= 1"));
            }
            let weights = fp
                .s_weights
                .clone()
                .unwrap_or_else(|| vec![1.0 / values.len() as f64; values.len()]);
            if weights.len() != values.len() || weights.iter().any(|w| !(*w > 0.0)) {
                return Err(violation("s_weights must be positive and match s_values"));
            }
            let total: f64 = weights.iter().sum();
            let weights = weights.iter().map(|w| w / total).collect();
            (
                ParameterSpace::Product { a0, b0, s_atoms: values.clone() },
                SelectionDensity::atom_weights(weights),
            )
        }
        None => {
            if !(0.0 < c0 && c0 < 1.0) {
                return Err(violation(format!("{name} requires 0 < c0 < 1")));
            }
            if a0 * c0 < 1.0 {
                return Err(violation(format!("{name} requires a0*c0 >= 1")));
            }
            let space = ParameterSpace::Triangle { a0, b0, c0 };
            let density = match fp.density.as_deref() {
                None | Some("uniform") => SelectionDensity::uniform_on(&space),
                Some("position") => SelectionDensity::paper_affine(c0, a0, b0),
                Some(other) => {
                    return Err(Error::InvalidSpec {
                        field: "family.params.density".into(),
                        message: format!("unknown density `{other}`"),
                    })
                }
            };
            (space, density)
        }
    };
    let near_zero = if indifferent {
        let (m_min, m_max) = range_over(a0, b0, example11_coefficient);
        NearZero::Power { m_min, m_max, d_min: a0, d_max: b0 }
    } else {
        NearZero::Linear {
            slope_min: b0 / (b0 - 1.0),
            slope_max: a0 / (a0 - 1.0),
        }
    };
    RandomMapSpec::new(
        space,
        if indifferent { MapFamily::Example11 } else { MapFamily::Example12 },
        density,
        (a0 - 1.0) / a0,
        FamilyInfo {
            name: name.into(),
            left: if indifferent { LeftClass::Indifferent } else { LeftClass::Expanding },
            near_zero,
            flags: vec![],
            lsv_t: None,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_core::params::ParamPoint;

    #[test]
    fn example12_parameter_triangle() {
        let fp = FamilyParams::default().with("a0", 1.5).with("b0", 2.5).with("c0", 0.8);
        let spec = builtin_family("example-1.2", &fp).unwrap();
        let (_, _, a1, _) = spec.bounds();
        assert!((a1 - 1.2).abs() < 1e-12);
    }

    #[test]
    fn lsv_flags_infinite_mass() {
        let spec = builtin_family("lsv-mod1", &FamilyParams::default().with("t", 2.0)).unwrap();
        assert!(spec.info.flags.iter().any(|f| f == "infinite invariant mass near 0"));
        let spec = builtin_family("lsv-mod1", &FamilyParams::default().with("t", 1.5)).unwrap();
        assert!(spec.info.flags.is_empty());
    }

    #[test]
    fn intro_root_rejects_attracting_case() {
        let err = builtin_family("intro-root", &FamilyParams::default().with("s", 5.0)).unwrap_err();
        match err {
            Error::ConstraintViolation(m) => assert!(m.contains("1 < s < 4")),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn both_pieces_are_onto() {
        for name in ["example-1.1", "example-1.2"] {
            let spec = builtin_family(name, &FamilyParams::default()).unwrap();
            for &(t, s) in &[(1.5, 1.2), (2.0, 1.5), (2.5, 2.0)] {
                let p = ParamPoint::new(t, s);
                let c = (t - 1.0) / t;
                let br = spec.branches(&p);
                assert!((br[0].eval(c) - 1.0).abs() < 1e-12);
                assert!(br[0].eval(0.0).abs() < 1e-12);
                assert!(br[1].eval(c).abs() < 1e-12);
                assert!((br[1].eval(1.0) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lsv_cut_solves_equation() {
        let c = lsv_cut(1.5);
        assert!((c + c.powf(1.5) - 1.0).abs() < 1e-14);
    }
}
