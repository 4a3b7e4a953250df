//! The `ergokit-spec/1` map-spec document.
//!
//! ```json
//! { "schema": "ergokit-spec/1",
//!   "family": { "name": "example-1.2", "params": { "a0": 1.5, "b0": 2.5, "c0": 0.8 } } }
//! ```
//! or
//! ```json
//! { "schema": "ergokit-spec/1",
//!   "custom": { "param_space": { "kind": "singleton", "t": 0 },
//!               "branches": [[ { "lo": 0, "hi": 0.5, "form": "linear", "a": 2, "b": 0 },
//!                              { "lo": 0.5, "hi": 1, "closed_right": true, "form": "linear", "a": 2, "b": -1 } ]],
//!               "density": { "form": "constant", "value": 1 },
//!               "cut": 0.5 } }
//! ```

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::branch::Branch;
use super::density::SelectionDensity;
use super::families::{builtin_family, FamilyParams};
use super::params::ParameterSpace;
use super::spec::{FamilyInfo, LeftClass, MapFamily, NearZero, RandomMapSpec};
use crate::error::{Error, Result};

pub const SPEC_SCHEMA: &str = "ergokit-spec/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    pub name: String,
    #[serde(default)]
    pub params: FamilyParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSection {
    pub param_space: ParameterSpace,
    /// One list shared by all parameters, or one list per atom.
    pub branches: Vec<Vec<Branch>>,
    pub density: SelectionDensity,
    pub cut: f64,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub left: Option<LeftClass>,
    #[serde(default)]
    pub near_zero: Option<NearZero>,
    /// See [`RandomMapSpec::dither`].
    #[serde(default)]
    pub dither: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomSection>,
}

impl SpecFile {
    pub fn family(name: &str, params: FamilyParams) -> Self {
        Self {
            schema: SPEC_SCHEMA.into(),
            family: Some(FamilySection { name: name.into(), params }),
            custom: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| invalid("", format!("not JSON: {e}")))?;
        check_shape(&value)?;
        serde_json::from_value(value).map_err(|e| invalid("", e.to_string()))
    }

    pub fn build(&self) -> Result<RandomMapSpec> {
        if self.schema != SPEC_SCHEMA {
            return Err(invalid("/schema", format!("expected `{SPEC_SCHEMA}`")));
        }
        match (&self.family, &self.custom) {
            (Some(f), None) => builtin_family(&f.name, &f.params),
            (None, Some(c)) => {
                let mut info = FamilyInfo::unknown(c.name.as_deref().unwrap_or("custom"));
                if let Some(l) = c.left {
                    info.left = l;
                }
                if let Some(nz) = c.near_zero {
                    info.near_zero = nz;
                }
                RandomMapSpec::new(
                    c.param_space.clone(),
                    MapFamily::Custom { maps: c.branches.clone() },
                    c.density.clone(),
                    c.cut,
                    info,
                )
                .map(|s| s.with_dither(c.dither))
            }
            _ => Err(invalid("/", "exactly one of `family` or `custom` is required")),
        }
    }

    /// SHA-256 of the canonical JSON form (sorted keys), hex, first 16 bytes.
    pub fn hash(&self) -> String {
        let v = serde_json::to_value(self).expect("spec serializes");
        let canonical = serde_json::to_string(&v).expect("value serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::InvalidSpec {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Reports the first missing required field as a JSON pointer.
fn check_shape(v: &Value) -> Result<()> {
    let obj = v.as_object().ok_or_else(|| invalid("/", "expected an object"))?;
    if !obj.contains_key("schema") {
        return Err(invalid("/schema", "missing field"));
    }
    if let Some(c) = obj.get("custom") {
        let c = c.as_object().ok_or_else(|| invalid("/custom", "expected an object"))?;
        for key in ["param_space", "branches", "density", "cut"] {
            if !c.contains_key(key) {
                return Err(invalid(&format!("/custom/{key}"), "missing field"));
            }
        }
    }
    if let Some(f) = obj.get("family") {
        if f.get("name").is_none() {
            return Err(invalid("/family/name", "missing field"));
        }
    }
    Ok(())
}
