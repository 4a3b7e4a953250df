//! Random maps `T = {T_t; p(t,x)}` on `[0,1]`: parameter spaces, branch
//! catalog, selection densities, built-in families and validation.

pub mod branch;
pub mod density;
pub mod families;
pub mod params;
pub mod schema;
pub mod spec;
pub mod validate;

pub use branch::{Branch, BranchForm};
pub use density::{DensityForm, SelectionDensity};
pub use families::{builtin_family, FamilyParams, FAMILY_NAMES};
pub use params::{Atom, BaseMeasure, ParamPoint, ParameterSpace};
pub use schema::{SpecFile, SPEC_SCHEMA};
pub use spec::{FamilyInfo, LeftClass, MapFamily, MarkovStep, NearZero, RandomMapSpec};
pub use validate::{validate_spec, validate_spec_with, ValidationReport};
