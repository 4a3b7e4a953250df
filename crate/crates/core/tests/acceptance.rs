//! End-to-end acceptance run, one line per criterion:
//!
//! ```text
//! cargo test --release --test acceptance            # all ten
//! cargo test --release --test acceptance -- 3 7     # a subset
//! ```
//!
//! Criteria run one after another so the wall-clock limits are measured
//! without competing work.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::MarkovSystem;
use ergokit::comparison::*;
use ergokit::error::Error;
use ergokit::first_return::{eps_targets, estimate_measure, estimate_return_probs, EstimatorConfig, Target};
use ergokit::map_core::{builtin_family, FamilyParams, RandomMapSpec};
use ergokit::profile::{parse_eps_grid, MeasureProfile, DEFAULT_GRID};
use ergokit::rng::StreamFactory;
use ergokit::scaling::{classify_finiteness, fit_exponent, predict, MassVerdict, ScalingFit};
use ergokit::transfer::{apply_pf, build_ulam, stationary_density, DensityVector};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn family(name: &str, fp: FamilyParams) -> RandomMapSpec {
    builtin_family(name, &fp).expect("builtin family")
}

fn params(kv: &[(&str, f64)]) -> FamilyParams {
    kv.iter().fold(FamilyParams::default(), |fp, &(k, v)| fp.with(k, v))
}

fn profile(spec: &RandomMapSpec, returns: usize, cap: u64, seed: u64) -> ergokit::Result<MeasureProfile> {
    let eps = parse_eps_grid(DEFAULT_GRID)?;
    let cfg = EstimatorConfig { cap, max_capped_fraction: 0.01, ..Default::default() };
    let est = estimate_measure(spec, spec.a_cut, &eps_targets(&eps), returns, &cfg, &StreamFactory::new(seed))?;
    Ok(MeasureProfile::from_estimate(&eps, &est))
}

fn in_band(f: &ScalingFit, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&f.alpha)
}

fn timed(limit: Option<Duration>, started: Instant, v: Verdict) -> Verdict {
    let took = started.elapsed();
    match limit {
        Some(l) if took > l => verdict(false, format!("{} | {took:.1?} over the {l:?} limit", v.detail)),
        _ => verdict(v.pass, format!("{} | {took:.1?}", v.detail)),
    }
}

fn fit_band(name: &str, fp: FamilyParams, with_log: bool, band: (f64, f64), returns: usize, cap: u64) -> ergokit::Result<Verdict> {
    let spec = family(name, fp);
    let prof = profile(&spec, returns, cap, 1)?;
    let f = fit_exponent(&prof, with_log)?;
    Ok(verdict(
        in_band(&f, band.0, band.1),
        format!("alpha {:.3} in [{}, {}], ci95 [{:.3}, {:.3}], {} points", f.alpha, band.0, band.1, f.ci95.0, f.ci95.1, f.eps_used.len()),
    ))
}

fn infinite_case(spec: &RandomMapSpec, returns: usize, cap: u64) -> ergokit::Result<Verdict> {
    let prediction = predict(spec)?;
    let prof = profile(spec, returns, cap, 1)?;
    let c = classify_finiteness(&prof, Some(&prediction))?;
    Ok(verdict(
        c.verdict == MassVerdict::InfiniteMassEvidence && c.agrees_with_prediction == Some(true),
        format!(
            "{:?}, alpha {:.3}, prefix change {:.2}, prediction {:?} agrees {:?}",
            c.verdict,
            c.fit.alpha,
            c.cauchy_change.unwrap_or(f64::NAN),
            prediction.regime,
            c.agrees_with_prediction
        ),
    ))
}

fn c1() -> ergokit::Result<Verdict> {
    let spec = family("doubling", FamilyParams::default());
    let streams = StreamFactory::new(1);
    let h = stationary_density(&build_ulam(&spec, 1024, 200, &streams)?, 1e-12, 100_000).density;
    let sup = h.sup_distance_to(1.0);
    let est = estimate_measure(&spec, 0.5, &[Target::below(0.25)], 100_000, &EstimatorConfig::default(), &streams)?;
    let mu = est.mu_hat[0];
    Ok(verdict(
        sup < 0.02 && (mu - 0.5).abs() <= 0.02,
        format!("sup |h - 1| = {sup:.4}, mu([0,1/4]) = {mu:.4}"),
    ))
}

fn c2() -> ergokit::Result<Verdict> {
    fit_band("lsv-mod1", params(&[("t", 1.5)]), false, (0.4, 0.6), 1_000_000, 1_000_000_000)
}

fn c3() -> ergokit::Result<Verdict> {
    infinite_case(&family("lsv-mod1", params(&[("t", 2.5)])), 1_000_000, 100_000_000)
}

fn c4() -> ergokit::Result<Verdict> {
    fit_band("intro-root", params(&[("s", 2.0)]), false, (1.85, 2.15), 1_000_000, 1_000_000_000)
}

fn c5() -> ergokit::Result<Verdict> {
    let fp = params(&[("a0", 1.5), ("b0", 2.5), ("c0", 0.8)]);
    fit_band("example-1.2", fp, true, (1.05, 1.35), 1_000_000, 1_000_000_000)
}

fn c6() -> ergokit::Result<Verdict> {
    let fp = params(&[("a0", 1.5), ("c0", 0.8)]);
    fit_band("example-1.1", fp, true, (0.55, 0.86), 100_000_000, 1_000_000_000)
}

fn c7() -> ergokit::Result<Verdict> {
    infinite_case(&family("example-1.1", params(&[("a0", 2.4), ("c0", 0.5)])), 3_000_000, 100_000_000)
}

fn c8() -> ergokit::Result<Verdict> {
    let mut fp = params(&[("a0", 1.5), ("b0", 2.5)]);
    fp.s_values = Some(vec![1.2, 1.4]);
    let spec = family("example-1.2", fp);
    let prof = profile(&spec, 1_000_000, 1_000_000_000, 1)?;
    let plain = fit_exponent(&prof, false)?;
    let logged = fit_exponent(&prof, true)?;
    Ok(verdict(
        in_band(&plain, 1.05, 1.35) && logged.rmse >= 1.1 * plain.rmse,
        format!("alpha {:.3}, rmse {:.4} vs {:.4} with log", plain.alpha, plain.rmse, logged.rmse),
    ))
}

fn c9() -> ergokit::Result<Verdict> {
    let spec = family("example-1.2", FamilyParams::default());
    let streams = StreamFactory::new(1);
    let opts = EnvelopeOptions::default();
    let lower = build_envelope(&spec, Side::Lower, Mode::Expanding, &opts, &streams)?;
    let upper = build_envelope(&spec, Side::Upper, Mode::Expanding, &opts, &streams)?;
    let eps = parse_eps_grid("2^-6..2^-14:geometric:2")?;
    let budgets = ComparisonBudgets { n_returns: 2_000_000, ..Default::default() };
    let rep = verify_comparison(&spec, &lower, &upper, &eps, &budgets, &streams)?;
    let informative = rep.rows.iter().filter(|r| r.mu > 0.0).count();
    let wrong = EnvelopeOptions { form: Some(EnvelopeForm::Linear { a: 2.0 }), ..Default::default() };
    let control = build_envelope(&spec, Side::Lower, Mode::Expanding, &wrong, &streams);
    let rejected = matches!(control, Err(Error::ContainmentViolation { .. }));
    Ok(verdict(
        rep.all_hold() && informative == rep.rows.len() && rejected,
        format!(
            "{}/{} rows hold, {} with mass, constants [{:.3}, {:.3}], negative control rejected: {rejected}",
            rep.rows.iter().filter(|r| r.lower_holds && r.upper_holds).count(),
            rep.rows.len(),
            informative,
            rep.constants.lower,
            rep.constants.upper
        ),
    ))
}

fn c10() -> ergokit::Result<Verdict> {
    let streams = StreamFactory::new(1);
    let ex12 = family("example-1.2", FamilyParams::default());

    // 2^16 trials: every p̂ₙ is dyadic, so the sum is exact
    let h = estimate_return_probs(&ex12, ex12.a_cut, 0.9, 1 << 16, 32, &streams)?;
    let total = h.probs.iter().sum::<f64>() + h.tail;

    let est = estimate_measure(&ex12, ex12.a_cut, &[Target::new(ex12.a_cut, 1.0)], 50_000, &EstimatorConfig::default(), &streams)?;
    let mu_a = est.mu_hat[0];

    let base = family("doubling", FamilyParams::default());
    let h0 = stationary_density(&build_ulam(&base, 1024, 200, &streams)?, 1e-13, 10_000).density;
    let mix = MixtureSpec::new(base, PHat::from_fn(0.5, |x| 0.3 + 0.8 * x));
    let (g, mass) = lemma21_transform(&h0, &mix.p_hat)?;
    let g = DensityVector { grid: g.grid, values: g.values.iter().map(|v| v / mass).collect() };
    let residual = apply_pf(&build_ulam(&mix, 1024, 200, &streams)?, &g)?.l1_distance(&g)?;

    let upper = build_envelope(&ex12, Side::Upper, Mode::Expanding, &EnvelopeOptions::default(), &streams)?;
    let aux_mix = MixtureSpec::new(assemble_aux_map(&ex12, &upper)?, PHat::for_envelope(&ex12, &upper)?);
    let c = ex12.a_cut;
    let mut within = 0;
    for k in 0..64u64 {
        let x = c + (1.0 - c) * (k as f64 + 0.5) / 64.0;
        if two_step_identity(&aux_mix, &upper, x, 0.05, 20_000, &streams.fork(k))?.within(3.0) {
            within += 1;
        }
    }

    let sys = MarkovSystem {
        cells: 4,
        maps: vec![
            vec![(0.0, 0.5, 2.0, 0.0), (0.5, 1.0, 2.0, -1.0)],
            vec![(0.0, 0.25, 1.0, 0.0), (0.25, 0.5, 2.0, -0.5), (0.5, 1.0, 1.0, -0.5)],
        ],
        probs: vec![0.4, 0.6],
    };
    let exact = sys.exact_density();
    let hm = stationary_density(&build_ulam(&sys.spec(), 256, 1000, &streams)?, 1e-12, 100_000).density;
    let l1: f64 = hm.values.iter().enumerate().map(|(i, v)| (v - exact[i * 4 / 256]).abs() / 256.0).sum();

    Ok(verdict(
        total == 1.0 && mu_a == 1.0 && residual < 0.02 && within == 64 && l1 < 0.01,
        format!(
            "sum p + tail = {total}, mu(A) = {mu_a}, mixture residual {residual:.4}, two-step {within}/64 within 3 sigma, partition L1 {l1:.4}"
        ),
    ))
}

type Criterion = (u32, fn() -> ergokit::Result<Verdict>, Option<u64>);

const CRITERIA: [Criterion; 10] = [
    (1, c1, Some(10)),
    (2, c2, Some(300)),
    (3, c3, None),
    (4, c4, Some(120)),
    (5, c5, Some(600)),
    (6, c6, Some(900)),
    (7, c7, None),
    (8, c8, None),
    (9, c9, None),
    (10, c10, None),
];

fn main() -> ExitCode {
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, run, limit) in CRITERIA {
        if !picked.is_empty() && !picked.contains(&n) {
            continue;
        }
        let started = Instant::now();
        let v = match run() {
            Ok(v) => timed(limit.map(Duration::from_secs), started, v),
            Err(e) => verdict(false, format!("error: {e}")),
        };
        println!("criterion {n:>2}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += !v.pass as u32;
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
