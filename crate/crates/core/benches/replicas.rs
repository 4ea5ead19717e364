use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hawkes_regen::par::Execution;
use hawkes_regen::queue::ServiceCdf;
use hawkes_regen::validate::{cluster_samples, cycle_lengths, queue_cycle_lengths};
use hawkes_regen::TransferFunction;

fn executions() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn bench_cycles(c: &mut Criterion) {
    let h = TransferFunction::exponential(0.5, 1.0).unwrap();
    let mut group = c.benchmark_group("regen_cycles");
    group.sample_size(10);
    for (name, exec) in executions() {
        group.bench_with_input(BenchmarkId::new(name, 20_000), &exec, |b, &exec| {
            b.iter(|| cycle_lengths(1.0, &h, 1.0, 20_000, 7, exec, 64).unwrap())
        });
    }
    group.finish();
}

fn bench_queue(c: &mut Criterion) {
    let svc = ServiceCdf::exp_dom(1.0, 0.0).unwrap();
    let mut group = c.benchmark_group("mm_inf_cycles");
    group.sample_size(10);
    for (name, exec) in executions() {
        group.bench_with_input(BenchmarkId::new(name, 200_000), &exec, |b, &exec| {
            b.iter(|| queue_cycle_lengths(1.0, &svc, 200_000, 7, exec, 64))
        });
    }
    group.finish();
}

fn bench_clusters(c: &mut Criterion) {
    let h = TransferFunction::exponential(0.5, 1.0).unwrap();
    let mut group = c.benchmark_group("clusters");
    group.sample_size(10);
    for (name, exec) in executions() {
        group.bench_with_input(BenchmarkId::new(name, 100_000), &exec, |b, &exec| {
            b.iter(|| cluster_samples(&h, 100_000, 7, exec, 64).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_cycles, bench_queue, bench_clusters);
criterion_main!(benches);
