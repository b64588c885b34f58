use criterion::{criterion_group, criterion_main, Criterion};
use reserveflow_core::io::{fixture_ieee118, fixture_twobus};
use reserveflow_core::solve_clearing;

fn bench_twobus(c: &mut Criterion) {
    let case = fixture_twobus();
    c.bench_function("solve_clearing/twobus", |b| {
        b.iter(|| solve_clearing(&case).unwrap())
    });
}

fn bench_sys118(c: &mut Criterion) {
    let case = fixture_ieee118();
    let mut group = c.benchmark_group("solve_clearing");
    group.sample_size(10);
    group.bench_function("sys118", |b| b.iter(|| solve_clearing(&case).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_twobus, bench_sys118);
criterion_main!(benches);
