use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use onc_bench::symmetric;
use onc_core::{
    assemble_lp, build_transition_matrix, optimal_policy, simulate, solve_lp,
    stationary_distribution, Policy, Scheme, SimConfig, StateSpace,
};

fn bench_lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("lp");
    group.sample_size(20);
    for n in [5, 10, 15] {
        let problem = assemble_lp(&symmetric(n, 0.5, 3.0)).unwrap();
        group.bench_with_input(BenchmarkId::new("solve", n), &problem, |b, p| {
            b.iter(|| solve_lp(black_box(p)))
        });
    }
    group.bench_function("optimal_policy/15", |b| {
        let params = symmetric(15, 0.5, 3.0);
        b.iter(|| optimal_policy(black_box(&params)).unwrap())
    });
    group.finish();
}

fn bench_stationary(c: &mut Criterion) {
    let params = symmetric(15, 0.5, 3.0);
    let policy = Policy::greedy(StateSpace::new(15, 15));
    let matrix = build_transition_matrix(&params, &policy).unwrap();
    c.bench_function("stationary/15", |b| {
        b.iter(|| stationary_distribution(black_box(&matrix)).unwrap())
    });
}

fn bench_simulate(c: &mut Criterion) {
    let params = symmetric(15, 0.5, 3.0);
    let (_, policy, _) = optimal_policy(&params).unwrap();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    for scheme in [Scheme::OptimalPolicy, Scheme::RandomMa, Scheme::CombinedMa] {
        let cfg = SimConfig::new(params, scheme, 100_000, 1);
        let policy = (scheme == Scheme::OptimalPolicy).then_some(&policy);
        group.bench_function(format!("{scheme:?}"), |b| {
            b.iter(|| simulate(black_box(&cfg), policy, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(lp, bench_lp);
criterion_group!(chain, bench_stationary);
criterion_group!(sim, bench_simulate);
criterion_main!(lp, chain, sim);
