mod common;

use common::*;
use ergokit::map_core::{builtin_family, FamilyParams, ParamPoint, FAMILY_NAMES};
use ergokit::rng::StreamFactory;
use ergokit::transfer::*;
use proptest::prelude::*;

#[test]
fn identity_spec_gives_identity_matrix() {
    let m = build_ulam(&identity(), 32, 100, &StreamFactory::new(3)).unwrap();
    for i in 0..32 {
        assert_eq!(m.get(i, i), 1.0);
    }
}

#[test]
fn two_map_rows_average_deterministic_rows() {
    let n = 16;
    let k = 20_000;
    let m = build_ulam(&two_three(), n, k, &StreamFactory::new(4)).unwrap();
    for i in 0..n {
        let r2 = exact_linear_row(&full_branches(2), n, i);
        let r3 = exact_linear_row(&full_branches(3), n, i);
        for j in 0..n {
            let q = 0.5 * (r2[j] + r3[j]);
            let se = (q * (1.0 - q) / k as f64).sqrt().max(1e-12);
            assert!((m.get(i, j) - q).abs() <= 3.0 * se, "({i},{j}): {} vs {q}", m.get(i, j));
        }
    }
}

#[test]
fn doubling_stationary_density_is_flat() {
    let m = build_ulam(&doubling(), 1024, 128, &StreamFactory::new(5)).unwrap();
    let r = stationary_density(&m, DEFAULT_TOL, DEFAULT_MAX_ITER);
    assert!(r.converged);
    assert!(r.density.sup_distance_to(1.0) < 0.02);
    let again = apply_pf(&m, &r.density).unwrap();
    assert!(again.l1_distance(&r.density).unwrap() < 1e-10);
}

#[test]
fn uniform_is_fixed_by_doubling() {
    let m = build_ulam(&doubling(), 64, 100, &StreamFactory::new(6)).unwrap();
    let u = DensityVector::uniform(m.grid);
    assert!(apply_pf(&m, &u).unwrap().sup_distance_to(1.0) < 1e-12);
}

#[test]
fn point_mass_under_identity() {
    let g = UlamGrid::new(8).unwrap();
    let mut v = vec![0.0; 8];
    v[3] = 8.0;
    let h = DensityVector { grid: g, values: v };
    assert_eq!(apply_pf(&TransitionMatrix::identity(g), &h).unwrap(), h);
}

#[test]
fn shape_mismatch_is_reported() {
    let m = TransitionMatrix::identity(UlamGrid::new(8).unwrap());
    let h = DensityVector::uniform(UlamGrid::new(4).unwrap());
    assert!(matches!(apply_pf(&m, &h), Err(ergokit::Error::ShapeMismatch { .. })));
}

#[test]
fn refinement_is_consistent_for_doubling() {
    let f = StreamFactory::new(7);
    let dens: Vec<DensityVector> = [64, 128, 256, 512, 1024]
        .iter()
        .map(|&n| {
            let m = build_ulam(&doubling(), n, 128, &f).unwrap();
            stationary_density(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).density
        })
        .collect();
    let dists: Vec<f64> = dens
        .windows(2)
        .map(|w| w[1].coarsen(2).unwrap().l1_distance(&w[0]).unwrap())
        .collect();
    assert!(dists.windows(2).all(|d| d[1] <= d[0]), "{dists:?}");
}

#[test]
fn rows_are_stochastic_for_builtins() {
    let fp = FamilyParams::default();
    for name in FAMILY_NAMES {
        let spec = builtin_family(name, &fp).unwrap();
        for n in [64, 1024] {
            let m = build_ulam(&spec, n, 100, &StreamFactory::new(8)).unwrap();
            for i in 0..n {
                assert!((m.row_sum(i) - 1.0).abs() < 1e-9, "{name} n={n} row {i}");
                assert!(m.row(i).all(|(_, v)| v >= 0.0));
            }
            let mut h = DensityVector::uniform(m.grid);
            for _ in 0..5 {
                h = apply_pf(&m, &h).unwrap();
                assert!((h.mass() - 1.0).abs() < 1e-9);
                assert!(h.values.iter().all(|&v| v >= 0.0));
            }
        }
    }
}

#[test]
fn two_three_matches_markov_oracle() {
    let sys = MarkovSystem {
        cells: 6,
        maps: vec![
            vec![(0.0, 0.5, 2.0, 0.0), (0.5, 1.0, 2.0, -1.0)],
            vec![(0.0, 1.0 / 3.0, 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0, 3.0, -1.0), (2.0 / 3.0, 1.0, 3.0, -2.0)],
        ],
        probs: vec![0.5, 0.5],
    };
    let exact = sys.exact_density();
    let m = build_ulam(&sys.spec(), 3 * 256, 1000, &StreamFactory::new(9)).unwrap();
    let h = stationary_density(&m, 1e-12, 100_000).density;
    let l1: f64 = h
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - exact[i * 6 / 768]).abs() / 768.0)
        .sum();
    assert!(l1 < 0.01, "{l1}");
}

#[test]
fn nonuniform_markov_system_matches_oracle() {
    // map 2 has slope-1 and slope-2 pieces, so the invariant density is not flat
    let sys = MarkovSystem {
        cells: 4,
        maps: vec![
            vec![(0.0, 0.5, 2.0, 0.0), (0.5, 1.0, 2.0, -1.0)],
            vec![(0.0, 0.25, 1.0, 0.0), (0.25, 0.5, 2.0, -0.5), (0.5, 1.0, 1.0, -0.5)],
        ],
        probs: vec![0.4, 0.6],
    };
    let exact = sys.exact_density();
    assert!(exact.iter().any(|v| (v - 1.0).abs() > 0.1), "{exact:?}");
    let m = build_ulam(&sys.spec(), 256, 1000, &StreamFactory::new(10)).unwrap();
    let h = stationary_density(&m, 1e-12, 100_000).density;
    let l1: f64 = h
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - exact[i * 4 / 256]).abs() / 256.0)
        .sum();
    assert!(l1 < 0.01, "{l1} {exact:?}");
}

#[test]
fn example12_density_positive_on_pullback() {
    let spec = builtin_family("example-1.2", &FamilyParams::default()).unwrap();
    let f = StreamFactory::new(11);
    let m = build_ulam(&spec, 4096, 200, &f).unwrap();
    let h = stationary_density(&m, 1e-10, 20_000).density;
    let region = pullback_region(&spec, spec.a_cut, &f).unwrap();
    let (g1, g2) = density_bounds_on(&h, &region).unwrap();
    assert!(g1 > 0.0 && g2 >= g1, "{g1} {g2}");
}

#[test]
fn doubling_bounds_near_one() {
    let m = build_ulam(&doubling(), 256, 128, &StreamFactory::new(12)).unwrap();
    let h = stationary_density(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).density;
    let (g1, g2) = density_bounds_on(&h, &[(0.5, 1.0)]).unwrap();
    assert!((g1 - 1.0).abs() < 0.02 && (g2 - 1.0).abs() < 0.02);
}

#[test]
fn hypotheses_doubling() {
    let r = check_hypotheses(&doubling(), HypothesisMode::Expanding);
    let c = r.condition("sup-integral").unwrap();
    assert!((c.value - 0.5).abs() < 1e-12);
    assert!(r.all_pass());
}

#[test]
fn hypotheses_lsv_expansion_fit() {
    let spec = builtin_family("lsv-mod1", &FamilyParams::default().with("t", 1.5)).unwrap();
    let r = check_hypotheses(&spec, HypothesisMode::Indifferent);
    let f = &r.expansions[0];
    assert!((f.m - 1.0).abs() < 0.05 && (f.d - 1.5).abs() < 0.075, "{f:?}");
}

#[test]
fn hypotheses_example11_monotone() {
    let spec = builtin_family("example-1.1", &FamilyParams::default()).unwrap();
    let r = check_hypotheses(&spec, HypothesisMode::Indifferent);
    assert_eq!(r.condition("monotone-near-zero").unwrap().status, Status::Pass);
    let _ = ParamPoint::new(0.0, 0.0);
}

fn markov_system() -> impl Strategy<Value = MarkovSystem> {
    let full = prop::sample::select(vec![2usize, 3, 4, 6, 8]);
    let lens = prop::collection::vec(1usize..=6, 6);
    let starts = prop::collection::vec(0usize..6, 6);
    (full, lens, starts, 0.3f64..0.7).prop_map(|(k, lens, starts, p)| {
        let map1 = (0..k)
            .map(|i| {
                let lo = i as f64 / k as f64;
                (lo, (i + 1) as f64 / k as f64, k as f64, -(i as f64))
            })
            .collect();
        let map2 = (0..6)
            .map(|j| {
                let m = lens[j];
                let start = starts[j].min(6 - m);
                let lo = j as f64 / 6.0;
                // cell j onto cells start..start+m, slope m
                (lo, (j + 1) as f64 / 6.0, m as f64, start as f64 / 6.0 - m as f64 * lo)
            })
            .collect();
        MarkovSystem {
            cells: 24,
            maps: vec![map1, map2],
            probs: vec![p, 1.0 - p],
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]
    #[test]
    fn ulam_matches_markov_oracle(sys in markov_system(), seed in 0u64..1000) {
        let exact = sys.exact_density();
        let m = build_ulam(&sys.spec(), 768, 1000, &StreamFactory::new(seed)).unwrap();
        let h = stationary_density(&m, 1e-12, 100_000).density;
        let l1: f64 = h.values.iter().enumerate()
            .map(|(i, v)| (v - exact[i * 24 / 768]).abs() / 768.0).sum();
        prop_assert!(l1 < 1e-2, "l1 = {}", l1);
    }
}
