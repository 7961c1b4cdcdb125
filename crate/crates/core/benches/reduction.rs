//! Benchmarks for the kernel reduction (parallel vs sequential) and for the
//! two time steppers.  Run with `cargo bench -p chemostat-core`; build with
//! `--no-default-features` to measure the sequential-only configuration.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use chemostat_core::dynamics::{
    initial_condition_gaussian, step_chemostat, step_direct, ScaleParams, State,
};
use chemostat_core::grid::TraitGrid;
use chemostat_core::model::{reduce_kernel, reduce_kernel_seq, Coefficients};

fn bench_reduction(c: &mut Criterion) {
    let mut group = c.benchmark_group("reduce_kernel");
    group.sample_size(10);
    for &(nx, ny) in &[(101usize, 401usize), (201, 801)] {
        let gx = TraitGrid::new(-2.0, 2.0, nx).unwrap();
        let gy = TraitGrid::new(-6.0, 6.0, ny).unwrap();
        let coeffs = Coefficients::gaussian_normalized(gx, gy, 0.5, 0.5, 1.0, 1.0).unwrap();
        group.bench_with_input(
            BenchmarkId::new("default", format!("{nx}x{ny}")),
            &coeffs,
            |b, coeffs| b.iter(|| reduce_kernel(coeffs).unwrap()),
        );
        group.bench_with_input(
            BenchmarkId::new("sequential", format!("{nx}x{ny}")),
            &coeffs,
            |b, coeffs| b.iter(|| reduce_kernel_seq(coeffs).unwrap()),
        );
    }
    group.finish();
}

fn bench_steppers(c: &mut Criterion) {
    let gx = TraitGrid::new(-2.0, 2.0, 201).unwrap();
    let gy = TraitGrid::new(-2.0, 2.0, 201).unwrap();
    let coeffs = Coefficients::gaussian_normalized(gx, gy, 0.5, 0.5, 1.0, 1.0).unwrap();
    let kernel = reduce_kernel(&coeffs).unwrap();
    let scales = ScaleParams::new(0.1, 0.005).unwrap();
    let n0 = initial_condition_gaussian(&coeffs.grid_x, -0.8, 0.005, 1.0).unwrap();
    let state = State::new(n0, coeffs.r_in.clone());

    let mut group = c.benchmark_group("step");
    group.bench_function("chemostat_201", |b| {
        b.iter(|| step_chemostat(&state, &coeffs, &scales, 0.01).unwrap())
    });
    group.bench_function("direct_201", |b| {
        b.iter(|| step_direct(&state, &coeffs, &kernel, &scales, 0.01).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_reduction, bench_steppers);
criterion_main!(benches);
