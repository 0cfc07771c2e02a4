use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use sublevy::kou::{build_field, KouSpec};
use sublevy::*;

fn spec() -> KouSpec {
    KouSpec::intervals((0.0, 0.1), (0.1, 0.3), (1.0, 2.0), 2.0)
}

fn field() -> CoefficientField {
    build_field(&spec(), 2, QuadratureSpec::window(10.0, 401)).expect("field")
}

fn operator(c: &mut Criterion) {
    let field = field();
    let grid = SpatialGrid::new(-10.0, 10.0, 801).unwrap();
    let op = DiscreteOperator::new(&field, &grid).unwrap();
    let u = grid.sample(&GaussianBump::new(0.0, 1.0, 1.0));
    let mut out = vec![0.0; u.len()];
    c.bench_function("operator apply, 801 nodes, 8 controls", |b| {
        b.iter(|| op.apply(black_box(&u), &mut out))
    });
}

fn pide_solve(c: &mut Criterion) {
    let field = field();
    let grid = SpatialGrid::new(-10.0, 10.0, 401).unwrap();
    let psi = grid.sample(&GaussianBump::new(0.0, 1.0, 1.0));
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    g.bench_function("T = 0.25, 401 nodes", |b| {
        b.iter(|| solve(&field, black_box(&psi), 0.25, &grid, &SolveOptions::default()).unwrap())
    });
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let field = field();
    let policy = PolicySchedule::constant(ControlId(7));
    let psi = GaussianBump::new(0.0, 1.0, 1.0);
    let mut g = c.benchmark_group("monte carlo");
    g.sample_size(10);
    g.bench_function("1000 paths, dt 1e-3", |b| {
        b.iter(|| estimate_value(&field, &policy, &psi, 0.0, 1.0, 1e-3, 1000, black_box(7)).unwrap())
    });
    g.finish();
}

fn quantile(c: &mut Criterion) {
    let tails = TailPair::symmetric(Tail::power_law(1.0, 1.5), Tail::exponential(2.0, 1.0));
    let opts = QuantileOptions::default();
    c.bench_function("quantile_k", |b| b.iter(|| quantile_k(&tails, black_box(0.7), &opts).unwrap()));
}

criterion_group!(benches, operator, pide_solve, monte_carlo, quantile);
criterion_main!(benches);
