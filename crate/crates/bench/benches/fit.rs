use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use edpls::{
    analytic_gaussian_sigma, fit, AirPlsConfig, FitConfig, PrivacyBudget, RngStream, SgConfig,
};
use edpls_bench::simulated;

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    for &(n, m) in &[(100, 100), (250, 400)] {
        let data = simulated(n, m, 7);
        let label = format!("{}x{m}", 2 * n);
        group.bench_with_input(BenchmarkId::new("baseline", &label), &data, |b, d| {
            b.iter(|| fit(d, &FitConfig::baseline(5)).unwrap())
        });
        let budget = PrivacyBudget::new(10.0, 0.01).unwrap();
        group.bench_with_input(BenchmarkId::new("private", &label), &data, |b, d| {
            b.iter(|| fit(d, &FitConfig::private(5, budget, RngStream::new(3, 2))).unwrap())
        });
    }
    group.finish();
}

fn bench_sigma(c: &mut Criterion) {
    let budget = PrivacyBudget::new(1.0, 1e-5).unwrap();
    c.bench_function("analytic_sigma", |b| {
        b.iter(|| analytic_gaussian_sigma(black_box(2.5), &budget).unwrap())
    });
}

fn bench_preprocess(c: &mut Criterion) {
    let x = simulated(100, 200, 9).x().clone();
    let sg = SgConfig::new(11, 2, 1).unwrap();
    c.bench_function("savitzky_golay_200x200", |b| {
        b.iter(|| edpls::preprocess::savitzky_golay(&x, &sg).unwrap())
    });
    let air = AirPlsConfig::default();
    c.bench_function("airpls_200x200", |b| {
        b.iter(|| edpls::preprocess::airpls_correct(&x, &air).unwrap())
    });
}

criterion_group!(benches, bench_fit, bench_sigma, bench_preprocess);
criterion_main!(benches);
