use thiserror::Error;

/// Errors raised across the library. Report-style operations never use these
/// for numerical failures; they carry pass/fail flags instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no branch covers x = {x} for parameter {param}")]
    NoBranch { x: f64, param: String },
    #[error("parameter {0} lies outside the parameter space")]
    ParamOutOfSpace(String),
    #[error("x = {x} is a branch endpoint; derivative undefined")]
    NonDifferentiablePoint { x: f64 },
    #[error("rejection sampler stalled: acceptance rate {rate:.2e} over {proposals} proposals")]
    RejectionStall { rate: f64, proposals: u64 },
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),
    #[error("invalid spec at `{field}`: {message}")]
    InvalidSpec { field: String, message: String },
    #[error("Ulam assembly failed: {0}")]
    AssemblyError(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("region does not intersect the grid")]
    EmptyRegion,
    #[error("{fraction:.3} of excursions hit the step cap (tail exponent {tail_exponent:?})")]
    CapExceededFraction {
        fraction: f64,
        tail_exponent: Option<f64>,
    },
    #[error("only {got} post burn-in returns; need at least {need}")]
    InsufficientReturns { got: usize, need: usize },
    #[error("containment violated at t = {param}, eps = {eps}: {detail}")]
    ContainmentViolation {
        param: String,
        eps: f64,
        detail: String,
    },
    #[error("p_hat vanishes at grid point x = {x}")]
    DivideByZero { x: f64 },
    #[error("degenerate comparison constant: {0}")]
    BoundDegenerate(String),
    #[error("no prediction available: {0}")]
    UnknownRegime(String),
    #[error("only {got} usable profile points; need {need}")]
    InsufficientPoints { got: usize, need: usize },
    #[error("profile is non-monotone beyond noise at eps = {eps}")]
    DegenerateProfile { eps: f64 },
    #[error("profile spans {decades:.2} decades; need at least {need}")]
    InsufficientSpan { decades: f64, need: f64 },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
