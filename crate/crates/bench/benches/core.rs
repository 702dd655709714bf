use std::hint::black_box;

use aqml_bench::a1_fixture;
use aqml_core::ansatz::{loss_and_gradient, propagate};
use aqml_core::controls::BasisKind;
use aqml_core::magnus::{expand, ising_local_spec, Resolver, SeriesMode, SymbolicHamiltonian};
use aqml_core::training::{random_init, trial_rng};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench_propagate(c: &mut Criterion) {
    let mut g = c.benchmark_group("propagate");
    for n in [2usize, 3, 4] {
        let (spec, theta, _) = a1_fixture(n, 5 * n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| propagate(black_box(&spec), black_box(&theta), 200).unwrap())
        });
    }
    g.finish();
}

fn bench_gradient(c: &mut Criterion) {
    let mut g = c.benchmark_group("loss_and_gradient");
    g.sample_size(20);
    for n in [2usize, 3, 4] {
        let (spec, theta, w) = a1_fixture(n, 5 * n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                loss_and_gradient(black_box(&spec), black_box(&theta), &w, 200, true).unwrap()
            })
        });
    }
    g.finish();
}

fn bench_magnus(c: &mut Criterion) {
    let spec = ising_local_spec(3, BasisKind::Fourier, 3, 0.2).unwrap();
    let ham = SymbolicHamiltonian::from_spec(&spec);
    let mut g = c.benchmark_group("magnus");
    for l in [2usize, 3] {
        g.bench_with_input(BenchmarkId::new("expand", l), &l, |b, &l| {
            b.iter(|| expand(black_box(&ham), l, SeriesMode::Exact).unwrap())
        });
    }
    let exp = expand(&ham, 2, SeriesMode::Exact).unwrap();
    let theta = random_init(&spec, &mut trial_rng(0, 0), 0.0, 1.0);
    let r = Resolver::from_spec(&spec, &theta).unwrap();
    g.bench_function("evaluate_l2", |b| {
        b.iter(|| exp.evaluate(black_box(&r)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bench_propagate, bench_gradient, bench_magnus);
criterion_main!(benches);
