use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hrmsbo_bench::toy_dataset;
use hrmsbo_core::direct::{direct_maximize, DirectBudget};
use hrmsbo_core::hyper::{map_estimate, HyperPriors, ParamPrior};
use hrmsbo_core::rng::stream;
use hrmsbo_core::space::unit_latin_hypercube;
use hrmsbo_core::{GpModel, MaternHyperparams};
use std::hint::black_box;

fn gp_fit(c: &mut Criterion) {
    let hyper = MaternHyperparams::isotropic(0.01, 1.0, 0.3, 0.0).unwrap();
    let mut group = c.benchmark_group("gp_fit");
    for n in [50, 200, 400] {
        let data = toy_dataset(3, n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| {
            b.iter(|| GpModel::fit(black_box(d), &hyper).unwrap().log_marginal_likelihood())
        });
    }
    group.finish();
}

fn map_fit(c: &mut Criterion) {
    let data = toy_dataset(3, 60, 2);
    let priors = HyperPriors::uniform_log(-3.0, 2.0, ParamPrior::Gaussian { mean: 0.0, var: 100.0 });
    c.bench_function("map_estimate_n60_r3", |b| {
        b.iter(|| {
            let mut rng = stream(5, &[]);
            map_estimate(&data, &priors, 3, None, &mut rng).unwrap().theta
        })
    });
}

fn direct(c: &mut Criterion) {
    let f = |x: &[f64]| -x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>();
    let mut group = c.benchmark_group("direct");
    for d in [2, 3] {
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, &d| {
            b.iter(|| direct_maximize(f, d, &DirectBudget::for_dims(d)).unwrap().best_value)
        });
    }
    group.finish();
}

fn latin_hypercube(c: &mut Criterion) {
    c.bench_function("lhs_1000x3", |b| {
        let mut rng = stream(9, &[]);
        b.iter(|| unit_latin_hypercube(3, 1000, &mut rng).unwrap().rows())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = gp_fit, map_fit, direct, latin_hypercube
}
criterion_main!(benches);
