mod common;

use common::{doubling, full_branches, lin, mixture};
use ergokit::comparison::*;
use ergokit::error::Error;
use ergokit::map_core::{builtin_family, FamilyParams, MarkovStep, ParamPoint};
use ergokit::rng::{Domain, StreamFactory};
use ergokit::transfer::{apply_pf, build_ulam, stationary_density, DensityVector, UlamGrid};

fn fam(name: &str, fp: FamilyParams) -> ergokit::map_core::RandomMapSpec {
    builtin_family(name, &fp).unwrap()
}

fn ex12() -> ergokit::map_core::RandomMapSpec {
    fam("example-1.2", FamilyParams::default().with("a0", 1.5).with("b0", 2.5).with("c0", 0.8))
}

fn env(spec: &ergokit::map_core::RandomMapSpec, side: Side, mode: Mode) -> Envelope {
    build_envelope(spec, side, mode, &EnvelopeOptions::default(), &StreamFactory::new(1)).unwrap()
}

#[test]
fn expanding_lower_uses_sup_slope() {
    let e = env(&ex12(), Side::Lower, Mode::Expanding);
    assert_eq!(e.form, EnvelopeForm::Linear { a: 3.0 });
    assert!((e.eval(0.1) - 0.3).abs() < 1e-12);
}

#[test]
fn lsv_lower_hand_value() {
    let spec = fam("lsv-mod1", FamilyParams::default().with("t", 1.5));
    let e = env(&spec, Side::Lower, Mode::Indifferent);
    assert!((e.eval(0.01) - 0.011).abs() < 1e-12);
}

#[test]
fn envelope_is_monotone_onto_and_expanding() {
    for (spec, mode) in [
        (ex12(), Mode::Expanding),
        (fam("example-1.1", FamilyParams::default()), Mode::Indifferent),
        (fam("example-7.1", FamilyParams::default()), Mode::Indifferent),
    ] {
        for side in [Side::Lower, Side::Upper] {
            let e = env(&spec, side, mode);
            let n = 2000;
            let mut prev = -1.0;
            for k in 0..n {
                let x = e.c * k as f64 / n as f64;
                let y = e.eval(x);
                assert!(y > prev && y < 1.0, "{side:?} at {x}");
                prev = y;
                if k > 0 {
                    let b = e.branches.iter().find(|b| b.contains(x)).unwrap();
                    assert!(b.derivative(x) > 1.0);
                }
            }
            assert!((e.eval(e.c * (1.0 - 1e-12)) - 1.0).abs() < 1e-9);
            for w in e.branches.windows(2) {
                let x = w[0].hi;
                assert!((w[0].eval(x) - w[1].eval(x)).abs() < 1e-12);
                assert!((w[0].derivative(x) - w[1].derivative(x)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn envelope_ordering_on_samples() {
    let spec = fam("example-1.1", FamilyParams::default());
    let lo = env(&spec, Side::Lower, Mode::Indifferent);
    let up = env(&spec, Side::Upper, Mode::Indifferent);
    let params = support_params(&spec, 128, &StreamFactory::new(3));
    for p in &params {
        let member = up.dominated_by(&spec, p);
        for &x in &lo.radii() {
            let y = spec.apply(p, x).unwrap();
            assert!(y <= lo.eval(x) * (1.0 + 1e-12));
            if member {
                assert!(up.eval(x) <= y * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn upper_without_slack_is_exact_for_a_member() {
    let fp = FamilyParams::default().with("t", 1.8).with("s", 1.3);
    let spec = fam("example-1.1-member", fp);
    let opts = EnvelopeOptions { kappa: 0.0, ..Default::default() };
    let e = build_envelope(&spec, Side::Upper, Mode::Indifferent, &opts, &StreamFactory::new(1)).unwrap();
    let EnvelopeForm::Power { d, .. } = e.form else { panic!() };
    assert_eq!(d, 1.8);
    assert!(e.dominated_by(&spec, &ParamPoint::new(1.8, 1.3)));
}

#[test]
fn aux_of_singleton_with_own_branch_is_the_map() {
    let spec = fam("example-1.2-member", FamilyParams::default().with("t", 1.5).with("s", 1.5));
    let e = env(&spec, Side::Lower, Mode::Expanding);
    assert_eq!(e.c_env, e.c);
    let aux = assemble_aux_map(&spec, &e).unwrap();
    let p = ParamPoint::new(1.5, 1.5);
    for k in 0..=1000 {
        let x = k as f64 / 1000.0;
        assert!((aux.apply(&p, x).unwrap() - spec.apply(&p, x).unwrap()).abs() < 1e-12);
    }
    assert_eq!(aux.apply(&p, 0.0).unwrap(), 0.0);
}

#[test]
fn aux_of_example12_is_valid_and_deterministic_on_the_left() {
    let spec = ex12();
    let aux = assemble_aux_map(&spec, &env(&spec, Side::Lower, Mode::Expanding)).unwrap();
    let params = support_params(&spec, 16, &StreamFactory::new(2));
    for p in &params {
        assert!((aux.apply(p, 0.2).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(aux.apply(p, 0.9).unwrap(), spec.apply(p, 0.9).unwrap());
    }
}

#[test]
fn wrong_lower_envelope_is_rejected() {
    let opts = EnvelopeOptions { form: Some(EnvelopeForm::Linear { a: 2.0 }), ..Default::default() };
    let err = build_envelope(&ex12(), Side::Lower, Mode::Expanding, &opts, &StreamFactory::new(1)).unwrap_err();
    assert!(matches!(err, Error::ContainmentViolation { .. }), "{err:?}");
}

#[test]
fn mixture_transition_examples() {
    let mut rng = StreamFactory::new(5).substream(Domain::User, 0);
    let mix = MixtureSpec::new(doubling(), PHat::constant(1.0, 0.5));
    let (v, _) = mixture_transition(&mix, 0.3, (0.5, 1.0), 10_000, &mut rng).unwrap();
    assert!((v - 0.5).abs() < 0.01);

    // P(x, D) = 0.3 for x = 0.6 ∈ D = [0.5, 1]: one map keeps x, the other sends it to 0.2
    let base = mixture(
        vec![vec![lin(0.0, 1.0, 1.0, 0.0, true)], full_branches(2)],
        &[0.3, 0.7],
        0.5,
    );
    let mix = MixtureSpec::new(base.clone(), PHat::constant(1.0, 0.5));
    let (v, se) = mixture_transition(&mix, 0.6, (0.5, 1.0), 100_000, &mut rng).unwrap();
    assert!((v - 0.65).abs() < 4.0 * se + 1e-9, "{v} ± {se}");

    let one = MixtureSpec::new(base.clone(), PHat::constant(1.0, 1.0));
    let (v, se) = mixture_transition(&one, 0.6, (0.5, 1.0), 100_000, &mut rng).unwrap();
    assert!((v - 0.3).abs() < 4.0 * se);
}

#[test]
fn lemma21_transform_examples() {
    let h = DensityVector::uniform(UlamGrid::new(64).unwrap());
    let (t, mass) = lemma21_transform(&h, &PHat::constant(1.0, 0.5)).unwrap();
    assert!(t.values.iter().all(|v| *v == 2.0) && (mass - 2.0).abs() < 1e-12);
    let (t, _) = lemma21_transform(&h, &PHat::constant(1.0, 1.0)).unwrap();
    assert_eq!(t, h);
    let err = lemma21_transform(&h, &PHat::from_fn(1.0, |x| if x < 0.1 { 0.0 } else { 1.0 }));
    assert!(matches!(err, Err(Error::DivideByZero { .. })));
}

fn lemma21_residual(n_bins: usize) -> f64 {
    let streams = StreamFactory::new(21);
    let base = doubling();
    let h = stationary_density(&build_ulam(&base, n_bins, 200, &streams).unwrap(), 1e-13, 10_000).density;
    let mix = MixtureSpec::new(base, PHat::constant(0.5, 0.5));
    let (g, mass) = lemma21_transform(&h, &mix.p_hat).unwrap();
    let g = DensityVector { grid: g.grid, values: g.values.iter().map(|v| v / mass).collect() };
    let m = build_ulam(&mix, n_bins, 200, &streams).unwrap();
    apply_pf(&m, &g).unwrap().l1_distance(&g).unwrap()
}

#[test]
fn lemma21_fixedness_for_doubling_mixture() {
    let r: Vec<f64> = [64, 128, 256, 1024].iter().map(|&n| lemma21_residual(n)).collect();
    assert!(r[3] < 0.02, "{r:?}");
    assert!(r[1] <= r[0] + 1e-9 && r[2] <= r[1] + 1e-9, "{r:?}");
}

#[test]
fn two_step_identity_on_example12_upper_aux() {
    let spec = ex12();
    let streams = StreamFactory::new(69);
    let up = env(&spec, Side::Upper, Mode::Expanding);
    let aux = assemble_aux_map(&spec, &up).unwrap();
    let p_hat = PHat::for_envelope(&spec, &up).unwrap();
    assert!(p_hat.values.iter().all(|v| *v > 0.0 && *v <= 1.0));
    let mix = MixtureSpec::new(aux, p_hat);
    let c = spec.a_cut;
    let eps = 0.05;
    let mut informative = 0;
    for k in 0..64 {
        let x = c + (1.0 - c) * (k as f64 + 0.5) / 64.0;
        let chk = two_step_identity(&mix, &up, x, eps, 20_000, &streams.fork(k)).unwrap();
        assert!(chk.within(3.0), "{chk:?}");
        if chk.closed_form > 0.0 {
            informative += 1;
        }
    }
    assert!(informative >= 4);
}

#[test]
fn p_hat_of_indifferent_upper_is_small_but_positive_on_atoms() {
    let spec = fam("example-1.1", FamilyParams::default());
    let up = env(&spec, Side::Upper, Mode::Indifferent);
    let p = PHat::for_envelope(&spec, &up).unwrap();
    let q = p.inf_below(up.c_star);
    assert!(q > 0.0 && q < 0.01, "{q}");

    let base = mixture(vec![full_branches(2)], &[1.0], 0.5);
    let p = PHat::constant(base.a_cut, 0.25);
    assert_eq!(p.eval(0.7), 1.0);
    assert_eq!(p.eval(0.1), 0.25);
    assert_eq!(p.inf_below(0.3), 0.25);
    let mix = MixtureSpec::new(base, p);
    let out = mix.outcomes(0.2).unwrap().unwrap();
    let total: f64 = out.iter().map(|o| o.0).sum();
    assert!((total - 1.0).abs() < 1e-12 && out.len() == 2);
}

#[test]
fn trivial_sandwich_for_singleton() {
    let spec = fam("example-1.2-member", FamilyParams::default().with("t", 1.5).with("s", 1.5));
    let lo = env(&spec, Side::Lower, Mode::Expanding);
    let up = env(&spec, Side::Upper, Mode::Expanding);
    let budgets = ComparisonBudgets { n_returns: 20_000, ulam_bins: 1024, ..Default::default() };
    let eps = [0.1, 0.05, 0.02];
    let rep = verify_comparison(&spec, &lo, &up, &eps, &budgets, &StreamFactory::new(8)).unwrap();
    assert!(rep.all_hold(), "{rep:#?}");
    assert_eq!(rep.constants.inf_p_hat, 1.0);
    for r in &rep.rows {
        let se = r.mu_se.hypot(r.mu_lower_aux_se);
        assert!((r.mu - r.mu_lower_aux).abs() < 4.0 * se);
    }
}
