use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use xgbias::logistic::fit_logistic;
use xgbias::multicalib::fit_updates;
use xgbias::sampler::overperformance_probability;
use xgbias::{build_distribution, poisson_binomial, synthetic, MultiCalibOptions, TrainOptions};
use xgbias_bench::{fixture, xg_list};

fn goal_distribution(c: &mut Criterion) {
    let mut g = c.benchmark_group("poisson_binomial");
    for n in [25, 150, 2000] {
        let xs = xg_list(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &xs, |b, xs| {
            b.iter(|| poisson_binomial(black_box(xs)).unwrap())
        });
    }
    g.finish();
}

fn training(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_logistic");
    g.sample_size(10);
    for n in [10_000, 50_000] {
        let f = fixture(n);
        g.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| fit_logistic(black_box(&f.rows), &f.labels, &TrainOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let f = fixture(50_000);
    let dist = build_distribution(&f.shots.shots).unwrap();
    let model = synthetic::reference_model();
    let mut g = c.benchmark_group("overperformance");
    g.sample_size(10);
    g.bench_function("n100_reps10000", |b| {
        b.iter(|| overperformance_probability(&dist, &model, 10.0, 100, 10_000, black_box(1)).unwrap())
    });
    g.finish();
}

fn multicalibration(c: &mut Criterion) {
    let f = fixture(50_000);
    let model = synthetic::reference_model();
    // a shifted base model leaves something for the boosting loop to fix
    let preds: Vec<f64> = model
        .predict_dataset(&f.shots.shots)
        .unwrap()
        .into_iter()
        .map(|p| (p * 0.8).clamp(0.001, 0.999))
        .collect();
    let mut g = c.benchmark_group("multicalibration");
    g.sample_size(10);
    g.bench_function("fit_50k", |b| {
        b.iter(|| fit_updates(black_box(&preds), &f.labels, &f.keys, &MultiCalibOptions::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, goal_distribution, training, sampling, multicalibration);
criterion_main!(benches);
