use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use hyperspn::circuit::{log_density_rows, log_weight_gradient, stream_eval, Evidence};
use hyperspn::hypernet::materialize_all;
use hyperspn_bench::fixture;
use std::hint::black_box;

const ROWS: usize = 64;

fn eval(c: &mut Criterion) {
    let mut group = c.benchmark_group("log_density_rows");
    group.throughput(Throughput::Elements(ROWS as u64));
    for (n, k, r) in [(16, 5, 50), (256, 2, 50), (256, 5, 50)] {
        let f = fixture(n, k, r, ROWS);
        group.bench_function(
            BenchmarkId::from_parameter(format!("n{n}_k{k}_r{r}")),
            |b| b.iter(|| log_density_rows(&f.structure, &f.weights, black_box(&f.rows)).unwrap()),
        );
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("log_weight_gradient");
    group.throughput(Throughput::Elements(ROWS as u64));
    for (n, k, r) in [(16, 5, 50), (256, 5, 50)] {
        let f = fixture(n, k, r, ROWS);
        let rows: Vec<usize> = (0..ROWS).collect();
        group.bench_function(
            BenchmarkId::from_parameter(format!("n{n}_k{k}_r{r}")),
            |b| {
                b.iter(|| {
                    log_weight_gradient(&f.structure, &f.weights, black_box(&f.rows), &rows)
                        .unwrap()
                })
            },
        );
    }
    group.finish();
}

fn stream(c: &mut Criterion) {
    let mut group = c.benchmark_group("stream_eval");
    for n in [256, 1024] {
        let f = fixture(n, 5, 10, 1);
        let evidence = Evidence::from_bits(f.rows.row(0));
        group.bench_function(BenchmarkId::new("stored", n), |b| {
            b.iter(|| stream_eval(&f.structure, &f.weights, black_box(&evidence)).unwrap())
        });
        group.bench_function(BenchmarkId::new("decoded", n), |b| {
            b.iter(|| stream_eval(&f.structure, &f.hyper, black_box(&evidence)).unwrap())
        });
    }
    group.finish();
}

fn materialize(c: &mut Criterion) {
    let mut group = c.benchmark_group("materialize_all");
    for n in [16, 256] {
        let f = fixture(n, 5, 50, 1);
        group.throughput(Throughput::Elements(f.structure.param_count() as u64));
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| materialize_all(black_box(&f.hyper), &f.structure))
        });
    }
    group.finish();
}

criterion_group!(benches, eval, gradient, stream, materialize);
criterion_main!(benches);
