use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fradelay_bench::{quadratic_system, reference_params, rotation_system};
use fradelay_core::{
    count_unstable_roots, ml_eval, solve_direct, solve_picard, EvalPolicy, RegionParams,
};
use num_complex::Complex64;

fn bench_ml_eval(c: &mut Criterion) {
    let p = reference_params();
    let policy = EvalPolicy::default();
    let mut group = c.benchmark_group("ml_eval");
    // Short times stay in double precision; long times need the extended path.
    for t in [2.5, 20.0, 60.0] {
        group.bench_with_input(BenchmarkId::from_parameter(t), &t, |b, &t| {
            b.iter(|| ml_eval(black_box(&p), black_box(t), &policy).unwrap())
        });
    }
    group.finish();
}

fn bench_eval_grid(c: &mut Criterion) {
    let p = reference_params();
    let mut group = c.benchmark_group("eval_grid");
    group.sample_size(10);
    for t_max in [10.0, 50.0] {
        let kernel = p.kernel(t_max, EvalPolicy::default()).unwrap();
        let h = 1e-2;
        let n = (t_max / h) as usize;
        group.bench_with_input(BenchmarkId::from_parameter(t_max), &n, |b, &n| {
            b.iter(|| kernel.eval_grid(h, 100, n).unwrap())
        });
    }
    group.finish();
}

fn bench_count_roots(c: &mut Criterion) {
    let rp = RegionParams::new(0.5, 1.0).unwrap();
    let mut group = c.benchmark_group("count_unstable_roots");
    for (name, lambda) in [("stable", Complex64::new(-1.0, 0.0)), ("unstable", Complex64::new(1.0, 0.0))] {
        group.bench_function(name, |b| b.iter(|| count_unstable_roots(black_box(lambda), &rp).unwrap()));
    }
    group.finish();
}

fn bench_solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solvers");
    group.sample_size(10);
    for h in [1e-2, 5e-3] {
        let spec = quadratic_system(10.0, h);
        group.bench_with_input(BenchmarkId::new("direct", h), &spec, |b, s| b.iter(|| solve_direct(s).unwrap()));
        group.bench_with_input(BenchmarkId::new("picard", h), &spec, |b, s| {
            b.iter(|| solve_picard(s, 1e-12, 200).unwrap())
        });
    }
    let spec = rotation_system(5.0, 1e-2);
    group.bench_function("picard_2x2", |b| b.iter(|| solve_picard(&spec, 1e-12, 200).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_ml_eval, bench_eval_grid, bench_count_roots, bench_solvers);
criterion_main!(benches);
