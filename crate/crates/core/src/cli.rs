//! The `ergokit` command line.
//!
//! Every artifact carries its provenance: JSON documents embed `schema`,
//! `seed` and `spec_hash`; CSV tables start with a `# schema=… seed=… spec=…`
//! comment line. Outputs depend only on the inputs and the seed, never on the
//! thread count.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::comparison::{build_envelope, verify_comparison, ComparisonBudgets, EnvelopeOptions, Mode, Side};
use crate::error::{Error, Result};
use crate::first_return::{eps_targets, estimate_measure, EstimatorConfig};
use crate::map_core::{validate_spec, MarkovStep, RandomMapSpec, SpecFile, SPEC_SCHEMA};
use crate::par;
use crate::profile::{decades, parse_eps_grid, MeasureProfile, DEFAULT_GRID};
use crate::rng::{Domain, StreamFactory};
use crate::scaling::{
    classify_finiteness, fit_exponent_seeded, predict_with, TheoremPrediction, DEFAULT_KAPPA,
    MIN_SPAN_DECADES,
};
use crate::transfer::{build_ulam, stationary_density_from, DensityVector, TransitionMatrix};

pub const REPORT_SCHEMA: &str = "ergokit-report/1";
pub const TABLE_SCHEMA: &str = "ergokit-table/1";

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_ESTIMATOR: u8 = 3;

const GRID_HELP: &str = "\
EPS GRIDS:
    A..B:geometric        geometric from A to B, ratio 2^(-1/2)
    A..B:geometric:R      the same with ratio R
    x1,x2,...             explicit list
    Numbers are decimals (0.01, 1e-3) or powers (2^-4).

EXIT CODES:
    0 success, 2 invalid input or failed validation, 3 estimator error.
    Errors are written to stderr as one JSON object.";

#[derive(Parser, Debug)]
#[command(name = "ergokit", version, about = "Invariant measures of position-dependent random interval maps", after_help = GRID_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct RunOpts {
    /// Master seed; every random stream is derived from it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads, 0 for all cores.
    #[arg(long, env = "ERGOKIT_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogChoice {
    /// Follow the theorem prediction (no correction without one).
    Auto,
    On,
    Off,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a spec file and print the validation report.
    Validate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write an orbit of the random map as CSV (n, x).
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        x0: f64,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble the Ulam matrix (binary) plus a JSON sidecar `<out>.json`.
    Ulam {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 1024)]
        bins: usize,
        #[arg(long, default_value_t = 1000)]
        samples_per_bin: usize,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stationary density of a stored Ulam matrix as CSV.
    Density {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = crate::transfer::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = crate::transfer::DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Excursion estimate of the profile ε ↦ μ([0, ε]) as CSV.
    FirstReturn {
        #[arg(long)]
        spec: PathBuf,
        /// Left end of A = [c, 1]; defaults to the spec's cut.
        #[arg(long)]
        cut: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        returns: usize,
        #[arg(long, default_value = DEFAULT_GRID)]
        eps_grid: String,
        /// Per-excursion step cap.
        #[arg(long, default_value_t = 1e9)]
        cap: f64,
        #[arg(long, default_value_t = 64)]
        segments: usize,
        /// Tolerated fraction of capped excursions.
        #[arg(long, default_value_t = 0.1)]
        max_capped: f64,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the lower/upper comparison inequalities on an ε grid.
    Compare {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum)]
        mode: CompareMode,
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: f64,
        #[arg(long, default_value = "2^-6..2^-14:geometric:2")]
        eps_grid: String,
        #[arg(long, default_value_t = 200_000)]
        returns: usize,
        #[arg(long, default_value_t = 4096)]
        bins: usize,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the scaling exponent of a stored profile.
    Scaling {
        #[arg(long)]
        profile: PathBuf,
        /// Spec whose theorem prediction selects the log correction.
        #[arg(long)]
        predict_from: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = LogChoice::Auto)]
        log: LogChoice,
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prediction, and with --all: simulation, fit and finiteness verdict.
    Report {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        all: bool,
        #[arg(long, default_value_t = 1_000_000)]
        returns: usize,
        #[arg(long, default_value = DEFAULT_GRID)]
        eps_grid: String,
        #[arg(long, default_value_t = 1e9)]
        cap: f64,
        #[arg(long, default_value_t = 0.1)]
        max_capped: f64,
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: f64,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        out: Option<PathBuf>,
        /// gnuplot-ready table of (log ε, log μ̂, fit line).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareMode {
    Indifferent,
    Expanding,
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure { code, body }) => {
            eprintln!("{body}");
            code
        }
    }
}

struct Failure {
    code: u8,
    body: Value,
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = exit_code(&e);
        let mut body = json!({ "error": error_kind(&e), "message": e.to_string() });
        if let Error::InvalidSpec { field, .. } = &e {
            body["field"] = json!(field);
        }
        Failure { code, body }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidSpec { .. }
        | Error::ConstraintViolation(_)
        | Error::Parse(_)
        | Error::Io(_)
        | Error::ParamOutOfSpace(_)
        | Error::ShapeMismatch { .. } => EXIT_VALIDATION,
        _ => EXIT_ESTIMATOR,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::NoBranch { .. } => "no-branch",
        Error::ParamOutOfSpace(_) => "param-out-of-space",
        Error::NonDifferentiablePoint { .. } => "non-differentiable-point",
        Error::RejectionStall { .. } => "rejection-stall",
        Error::ConstraintViolation(_) => "constraint-violation",
        Error::InvalidSpec { .. } => "invalid-spec",
        Error::AssemblyError(_) => "assembly-error",
        Error::ShapeMismatch { .. } => "shape-mismatch",
        Error::EmptyRegion => "empty-region",
        Error::CapExceededFraction { .. } => "cap-exceeded-fraction",
        Error::InsufficientReturns { .. } => "insufficient-returns",
        Error::ContainmentViolation { .. } => "containment-violation",
        Error::DivideByZero { .. } => "divide-by-zero",
        Error::BoundDegenerate(_) => "bound-degenerate",
        Error::UnknownRegime(_) => "unknown-regime",
        Error::InsufficientPoints { .. } => "insufficient-points",
        Error::DegenerateProfile { .. } => "degenerate-profile",
        Error::InsufficientSpan { .. } => "insufficient-span",
        Error::Parse(_) => "parse",
        Error::Io(_) => "io",
    }
}

struct LoadedSpec {
    file: SpecFile,
    spec: RandomMapSpec,
    hash: String,
}

fn load_spec(path: &Path) -> Result<LoadedSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let file = SpecFile::parse(&text)?;
    let spec = file.build()?;
    let hash = file.hash();
    Ok(LoadedSpec { file, spec, hash })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufReader::new(f))
}

/// Writes to `out`, or stdout when absent.
fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    schema: &'static str,
    kind: &'a str,
    spec_schema: &'static str,
    seed: Option<u64>,
    spec_hash: Option<&'a str>,
    result: T,
}

fn emit_json<T: Serialize>(
    out: Option<&Path>,
    kind: &str,
    seed: Option<u64>,
    hash: Option<&str>,
    result: T,
) -> Result<()> {
    let doc = Artifact {
        schema: REPORT_SCHEMA,
        kind,
        spec_schema: SPEC_SCHEMA,
        seed,
        spec_hash: hash,
        result,
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
    emit(out, |w| Ok(writeln!(w, "{text}")?))
}

fn provenance(seed: Option<u64>, hash: Option<&str>) -> Vec<(&'static str, String)> {
    vec![
        ("seed", seed.map_or("none".into(), |s| s.to_string())),
        ("spec", hash.unwrap_or("none").to_string()),
    ]
}

/// `key=value` pairs of the first `#` line of a table.
fn read_provenance(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut line = String::new();
    open(path)?.read_line(&mut line)?;
    Ok(line
        .strip_prefix('#')
        .unwrap_or("")
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

fn cap_steps(cap: f64) -> Result<u64> {
    if cap.is_finite() && cap >= 1.0 {
        Ok(cap as u64)
    } else {
        Err(Error::Parse(format!("cap {cap} must be a finite number >= 1")))
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let threads = match &cli.command {
        Command::Simulate { run, .. }
        | Command::Ulam { run, .. }
        | Command::FirstReturn { run, .. }
        | Command::Compare { run, .. }
        | Command::Report { run, .. } => run.threads,
        _ => 0,
    };
    par::with_threads(threads, move || dispatch(cli.command))
}

fn dispatch(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Validate { spec, out } => {
            let s = load_spec(&spec)?;
            let report = validate_spec(&s.spec);
            emit_json(out.as_deref(), "validate", None, Some(&s.hash), &report)?;
            if !report.failures.is_empty() {
                return Err(Failure {
                    code: EXIT_VALIDATION,
                    body: json!({ "error": "validation-failed", "message": report.failures.join("; ") }),
                });
            }
        }
        Command::Simulate { spec, x0, steps, run, out } => {
            let s = load_spec(&spec)?;
            if !(0.0..=1.0).contains(&x0) {
                return Err(Error::Parse(format!("x0 = {x0} outside [0, 1]")).into());
            }
            let mut rng = StreamFactory::new(run.seed).substream(Domain::User, 0);
            let mut x = x0;
            let mut orbit = Vec::with_capacity(steps as usize + 1);
            orbit.push(x);
            for _ in 0..steps {
                x = s.spec.step(x, &mut rng)?;
                orbit.push(x);
            }
            emit(out.as_deref(), |w| {
                write_comment(w, run.seed, &s.hash)?;
                writeln!(w, "n,x")?;
                for (n, x) in orbit.iter().enumerate() {
                    writeln!(w, "{n},{x}")?;
                }
                Ok(())
            })?;
        }
        Command::Ulam { spec, bins, samples_per_bin, run, out } => {
            let s = load_spec(&spec)?;
            let m = build_ulam(&s.spec, bins, samples_per_bin, &StreamFactory::new(run.seed))?;
            let mut w = create(&out)?;
            m.write_to(&mut w)?;
            w.flush()?;
            let meta = json!({
                "bins": bins,
                "samples_per_bin": samples_per_bin,
                "discarded": m.discarded,
                "nnz": m.nnz(),
                "spec": s.file,
            });
            emit_json(Some(&sidecar(&out)), "ulam", Some(run.seed), Some(&s.hash), meta)?;
        }
        Command::Density { matrix, tol, max_iter, out } => {
            let m = TransitionMatrix::read_from(open(&matrix)?)?;
            let (seed, hash) = match std::fs::read_to_string(sidecar(&matrix)) {
                Ok(text) => {
                    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
                    (v["seed"].as_u64(), v["spec_hash"].as_str().map(str::to_string))
                }
                Err(_) => (None, None),
            };
            let st = stationary_density_from(&m, DensityVector::uniform(m.grid), tol, max_iter);
            emit(out.as_deref(), |w| {
                write!(w, "# schema={TABLE_SCHEMA}")?;
                for (k, v) in provenance(seed, hash.as_deref()) {
                    write!(w, " {k}={v}")?;
                }
                writeln!(w, " converged={} residual={:e} iterations={}", st.converged, st.residual, st.iterations)?;
                st.density.write_csv(w)
            })?;
        }
        Command::FirstReturn { spec, cut, returns, eps_grid, cap, segments, max_capped, run, out } => {
            let s = load_spec(&spec)?;
            let eps = parse_eps_grid(&eps_grid)?;
            let cfg = EstimatorConfig {
                cap: cap_steps(cap)?,
                segments,
                max_capped_fraction: max_capped,
                ..Default::default()
            };
            let c = cut.unwrap_or(s.spec.a_cut);
            let est = estimate_measure(&s.spec, c, &eps_targets(&eps), returns, &cfg, &StreamFactory::new(run.seed))?;
            let prof = MeasureProfile::from_estimate(&eps, &est);
            emit(out.as_deref(), |w| prof.write_csv(w, &provenance(Some(run.seed), Some(&s.hash))))?;
        }
        Command::Compare { spec, mode, kappa, eps_grid, returns, bins, run, out } => {
            let s = load_spec(&spec)?;
            let streams = StreamFactory::new(run.seed);
            let mode = match mode {
                CompareMode::Indifferent => Mode::Indifferent,
                CompareMode::Expanding => Mode::Expanding,
            };
            let opts = EnvelopeOptions { kappa, ..Default::default() };
            let lower = build_envelope(&s.spec, Side::Lower, mode, &opts, &streams)?;
            let upper = build_envelope(&s.spec, Side::Upper, mode, &opts, &streams)?;
            let eps = parse_eps_grid(&eps_grid)?;
            let budgets = ComparisonBudgets { n_returns: returns, ulam_bins: bins, ..Default::default() };
            let rep = verify_comparison(&s.spec, &lower, &upper, &eps, &budgets, &streams)?;
            let result = json!({
                "kappa": kappa,
                "lower_envelope": lower,
                "upper_envelope": upper,
                "all_hold": rep.all_hold(),
                "report": rep,
            });
            emit_json(out.as_deref(), "compare", Some(run.seed), Some(&s.hash), result)?;
        }
        Command::Scaling { profile, predict_from, log, kappa, out } => {
            let prof = MeasureProfile::read_csv(open(&profile)?)?;
            let meta = read_provenance(&profile)?;
            let seed = meta.get("seed").and_then(|s| s.parse().ok());
            let prediction = match &predict_from {
                Some(p) => Some(predict_with(&load_spec(p)?.spec, kappa)?),
                None => None,
            };
            let result = scaling_result(&prof, prediction.as_ref(), log, seed.unwrap_or(0))?;
            emit_json(out.as_deref(), "scaling", seed, meta.get("spec").map(String::as_str), result)?;
        }
        Command::Report { spec, all, returns, eps_grid, cap, max_capped, kappa, run, out, csv } => {
            let s = load_spec(&spec)?;
            let validation = validate_spec(&s.spec);
            let prediction = predict_with(&s.spec, kappa);
            let mut result = json!({
                "family": s.spec.info.name,
                "validation_failures": validation.failures,
                "prediction": prediction.as_ref().ok(),
                "prediction_error": prediction.as_ref().err().map(|e| e.to_string()),
            });
            if all {
                let eps = parse_eps_grid(&eps_grid)?;
                let cfg = EstimatorConfig {
                    cap: cap_steps(cap)?,
                    max_capped_fraction: max_capped,
                    ..Default::default()
                };
                let est = estimate_measure(
                    &s.spec,
                    s.spec.a_cut,
                    &eps_targets(&eps),
                    returns,
                    &cfg,
                    &StreamFactory::new(run.seed),
                )?;
                let prof = MeasureProfile::from_estimate(&eps, &est);
                let analysis = scaling_result(&prof, prediction.as_ref().ok(), LogChoice::Auto, run.seed)?;
                if let Some(path) = &csv {
                    let fit: Option<crate::scaling::ScalingFit> =
                        serde_json::from_value(analysis["fit"].clone()).ok();
                    let mut w = create(path)?;
                    write_comment(&mut w, run.seed, &s.hash)?;
                    writeln!(w, "log_eps,log_mu_hat,fit")?;
                    for i in 0..prof.len() {
                        let fitted = fit.as_ref().map_or(f64::NAN, |f| f.predict_log(prof.eps[i]));
                        writeln!(w, "{},{},{}", prof.eps[i].ln(), prof.mu_hat[i].ln(), fitted)?;
                    }
                    w.flush()?;
                }
                result["profile"] = json!(prof_summary(&prof, &est));
                result["analysis"] = analysis;
            }
            emit_json(out.as_deref(), "report", Some(run.seed), Some(&s.hash), result)?;
        }
    }
    Ok(())
}

fn write_comment(w: &mut dyn Write, seed: u64, hash: &str) -> Result<()> {
    writeln!(w, "# schema={TABLE_SCHEMA} seed={seed} spec={hash}")?;
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn prof_summary(prof: &MeasureProfile, est: &crate::first_return::SigmaFiniteEstimate) -> Value {
    json!({
        "eps": prof.eps,
        "mu_hat": prof.mu_hat,
        "stderr": prof.stderr,
        "mu_hat_half": prof.mu_hat_half,
        "capped_fraction": est.capped_fraction,
        "excursions": est.excursions,
        "total_steps": est.total_steps,
        "tail_exponent": est.tail_exponent,
    })
}

/// Fit (log correction as chosen), band check against the prediction and,
/// when the grid spans enough decades, the finiteness verdict.
fn scaling_result(
    prof: &MeasureProfile,
    prediction: Option<&TheoremPrediction>,
    log: LogChoice,
    seed: u64,
) -> Result<Value> {
    let with_log = match log {
        LogChoice::On => true,
        LogChoice::Off => false,
        LogChoice::Auto => prediction.is_some_and(|p| p.log_correction),
    };
    let streams = StreamFactory::new(seed);
    let (fit, fit_error) = match fit_exponent_seeded(prof, with_log, &streams) {
        Ok(f) => (Some(f), None),
        Err(e @ (Error::InsufficientPoints { .. } | Error::DegenerateProfile { .. })) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let in_band = match (&fit, prediction.and_then(|p| p.band(0.15))) {
        (Some(f), Some((lo, hi))) => Some(f.alpha >= lo && f.alpha <= hi),
        _ => None,
    };
    let span = decades(&prof.eps);
    let classification = if span >= MIN_SPAN_DECADES {
        Some(classify_finiteness(prof, prediction)?)
    } else {
        None
    };
    Ok(json!({
        "with_log": with_log,
        "fit": fit,
        "fit_error": fit_error,
        "prediction": prediction,
        "within_band": in_band,
        "span_decades": span,
        "classification": classification,
    }))
}
