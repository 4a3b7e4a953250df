//! One worker thread against the full pool on the two hot loops: Ulam
//! assembly and the excursion estimator. `cargo bench --no-default-features`
//! measures the rayon-free build instead.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ergokit::first_return::{eps_targets, estimate_measure, EstimatorConfig};
use ergokit::map_core::{builtin_family, FamilyParams};
use ergokit::par;
use ergokit::rng::StreamFactory;
use ergokit::transfer::build_ulam;

fn threads() -> [(&'static str, usize); 2] {
    [("sequential", 1), ("parallel", 0)]
}

fn ulam(c: &mut Criterion) {
    let fp = FamilyParams::default().with("a0", 1.5).with("b0", 2.5).with("c0", 0.8);
    let spec = builtin_family("example-1.2", &fp).unwrap();
    let streams = StreamFactory::new(1);
    let mut g = c.benchmark_group("ulam_1024x200");
    g.sample_size(10);
    for (label, n) in threads() {
        g.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| par::with_threads(n, || black_box(build_ulam(&spec, 1024, 200, &streams).unwrap())))
        });
    }
    g.finish();
}

fn excursions(c: &mut Criterion) {
    let spec = builtin_family("lsv-mod1", &FamilyParams::default().with("t", 1.5)).unwrap();
    let eps = [0.0625, 0.015625, 0.00390625];
    let targets = eps_targets(&eps);
    let cfg = EstimatorConfig::default();
    let streams = StreamFactory::new(1);
    let mut g = c.benchmark_group("excursions_lsv_1e5");
    g.sample_size(10);
    for (label, n) in threads() {
        g.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| {
                par::with_threads(n, || {
                    black_box(estimate_measure(&spec, spec.a_cut, &targets, 100_000, &cfg, &streams).unwrap())
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, ulam, excursions);
criterion_main!(benches);
