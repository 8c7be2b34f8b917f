use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mvexpectile::asymptotics::{limit_independent, solve_limit_system};
use mvexpectile::expectile::{solve_multivariate_expectile, univariate_expectile};
use mvexpectile::{Dependence, ExpectileProblem, MarginSpec, TailDependenceModel};

fn margins(d: usize) -> Vec<MarginSpec> {
    (0..d)
        .map(|i| MarginSpec::pareto(2.0, 10.0 + 5.0 * i as f64).unwrap())
        .collect()
}

fn exact(c: &mut Criterion) {
    let m = MarginSpec::burr(4.0, 10.0, 0.75).unwrap();
    c.bench_function("univariate_expectile/burr", |b| {
        b.iter(|| univariate_expectile(black_box(&m), 0.999, 1e-14).unwrap())
    });

    let mut group = c.benchmark_group("multivariate_expectile");
    for d in [2, 3, 5] {
        for dep in [Dependence::Independent, Dependence::Comonotonic] {
            let prob = ExpectileProblem::l1(margins(d), dep, 0.999).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("{dep:?}"), d), &prob, |b, p| {
                b.iter(|| solve_multivariate_expectile(black_box(p), 1e-10, 200).unwrap())
            });
        }
    }
    group.finish();
}

fn limits(c: &mut Criterion) {
    let mut group = c.benchmark_group("limit_system");
    let c3 = [1.0, 2.25, 4.0];
    let init = limit_independent(2.0, &c3).unwrap();
    let models = [
        ("independent", TailDependenceModel::Independent),
        ("comonotonic", TailDependenceModel::Comonotonic),
        (
            "archimedean",
            TailDependenceModel::archimedean(1.5).unwrap(),
        ),
    ];
    for (name, model) in models {
        group.bench_function(name, |b| {
            b.iter(|| solve_limit_system(2.0, black_box(&c3), &model, &init, 1e-12).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, exact, limits);
criterion_main!(benches);
