use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use willmore_bench::{cubic_example, dense_pair, random_instance};
use willmore_core::{curvature_pack, solve_singular_yamabe, willmore_invariant, SolverOptions};

fn jet_multiplication(c: &mut Criterion) {
    let mut group = c.benchmark_group("jet_mul");
    for (d, n) in [(4, 6), (6, 8)] {
        let (a, b) = dense_pair(d, n);
        group.bench_with_input(BenchmarkId::from_parameter(format!("d{d}_n{n}")), &(a, b), |bench, (a, b)| {
            bench.iter(|| a * b)
        });
    }
    group.finish();
}

fn curvature(c: &mut Criterion) {
    let mut group = c.benchmark_group("curvature_pack");
    group.sample_size(10);
    for d in [4, 5] {
        let (m, _) = random_instance(d);
        group.bench_with_input(BenchmarkId::from_parameter(d), &m, |bench, m| bench.iter(|| curvature_pack(m).unwrap()));
    }
    group.finish();
}

fn yamabe(c: &mut Criterion) {
    let mut group = c.benchmark_group("singular_yamabe");
    group.sample_size(10);
    for d in [4, 5] {
        let (m, s) = random_instance(d);
        let pack = curvature_pack(&m).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(d), &(pack, s), |bench, (pack, s)| {
            bench.iter(|| solve_singular_yamabe(pack, s, SolverOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn obstruction(c: &mut Criterion) {
    let mut group = c.benchmark_group("willmore_invariant");
    group.sample_size(10);
    for d in [4, 6] {
        let (m, s) = cubic_example(d);
        group.bench_with_input(BenchmarkId::from_parameter(d), &(m, s), |bench, (m, s)| {
            bench.iter(|| willmore_invariant(m, s).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, jet_multiplication, curvature, yamabe, obstruction);
criterion_main!(benches);
