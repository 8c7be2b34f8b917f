use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use mvexpectile::estimation::{estimate_extreme_expectile, hill_estimator};
use mvexpectile::simulation::{draw_sample, run_k_sweep};
use mvexpectile::{Dependence, ExperimentConfig, MarginSpec, Norm};

fn pareto_pair() -> Vec<MarginSpec> {
    vec![
        MarginSpec::pareto(2.0, 10.0).unwrap(),
        MarginSpec::pareto(2.0, 15.0).unwrap(),
    ]
}

fn estimators(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimators");
    for n in [10_000usize, 100_000] {
        let sample = draw_sample(&pareto_pair(), Dependence::Independent, n, 1).unwrap();
        let column = sample.column(0);
        let k = n / 100;
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("hill", n), &column, |b, col| {
            b.iter(|| hill_estimator(black_box(col), k).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("extreme_expectile", n), &sample, |b, s| {
            b.iter(|| {
                estimate_extreme_expectile(
                    black_box(s),
                    k,
                    0.999,
                    Dependence::Independent,
                    Norm::L1,
                )
                .unwrap()
            })
        });
        group.bench_function(BenchmarkId::new("draw_sample", n), |b| {
            b.iter(|| {
                draw_sample(&pareto_pair(), Dependence::Comonotonic, n, black_box(7)).unwrap()
            })
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let config = ExperimentConfig {
        margins: pareto_pair(),
        dependence: Dependence::Independent,
        alpha_grid: vec![0.99, 0.999],
        k_grid: Vec::new(),
        n: 10_000,
        replications: 10,
        master_seed: 3,
        norm: Norm::L1,
    };
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("n1e4_reps10", |b| {
        b.iter(|| run_k_sweep(black_box(&config)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, estimators, sweep);
criterion_main!(benches);
