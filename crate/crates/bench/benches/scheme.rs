use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use memheat::{
    advance, build_step_operator, initialize, paper_ramp, run, volterra_solve, ExpSumKernel, Grid1D, KernelPair,
    ProblemSpec, SchemeConfig, Source, TridiagonalOperator,
};

fn problem(n: usize, flux: &[(f64, f64)], capacity: &[(f64, f64)], horizon: f64) -> ProblemSpec {
    let grid = Grid1D::new(n).unwrap();
    let kernels = KernelPair::new(
        ExpSumKernel::from_pairs(flux).unwrap(),
        ExpSumKernel::from_pairs(capacity).unwrap(),
    );
    ProblemSpec::new(grid, kernels, paper_ramp(&grid), Source::Zero, horizon).unwrap()
}

fn thomas(c: &mut Criterion) {
    let mut group = c.benchmark_group("tridiagonal");
    for n in [499, 4999] {
        let grid = Grid1D::new(n).unwrap();
        let op = TridiagonalOperator::laplacian(&grid).shifted(1.0, 5e-5);
        let rhs = paper_ramp(&grid);
        group.bench_with_input(BenchmarkId::new("factor", n), &n, |b, _| {
            b.iter(|| black_box(op.factor().unwrap()))
        });
        let factor = op.factor().unwrap();
        group.bench_with_input(BenchmarkId::new("solve", n), &n, |b, _| {
            b.iter(|| black_box(factor.solve(black_box(&rhs)).unwrap()))
        });
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("advance");
    let config = SchemeConfig::implicit(5e-5).unwrap();
    for terms in [0usize, 1, 4] {
        let pairs: Vec<(f64, f64)> = (0..terms).map(|i| (5.0, 1.0 + i as f64)).collect();
        let p = problem(499, &pairs, &pairs, 0.1);
        let stepop = build_step_operator(&p, config).unwrap();
        let state = initialize(&p).unwrap();
        group.bench_with_input(BenchmarkId::new("h2e-3_terms", terms), &terms, |b, _| {
            b.iter(|| black_box(advance(black_box(&state), &stepop, &p).unwrap()))
        });
    }
    group.finish();
}

fn full_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("run");
    group.sample_size(10);
    let p = problem(499, &[(5.0, 1.0)], &[(5.0, 1.0)], 0.1);
    group.bench_function("model4_h2e-3_2000_steps", |b| {
        b.iter(|| black_box(run(&p, SchemeConfig::implicit(5e-5).unwrap(), &mut []).unwrap()))
    });
    let p = problem(50, &[(5.0, 1.0)], &[(5.0, 1.0)], 0.1);
    group.bench_function("volterra_n50_400_steps", |b| {
        b.iter(|| black_box(volterra_solve(&p, 2.5e-4).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, thomas, step, full_runs);
criterion_main!(benches);
