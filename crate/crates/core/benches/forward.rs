use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use csnet::bench::{bench_inputs, bench_network, BenchCase};
use csnet::par::Parallelism;
use csnet::train::{grad, Example, Input, LossKind, LossSpec, SlotBatch};
use csnet::AlgebraDescriptor;

fn modes() -> [(&'static str, Parallelism); 2] {
    [("sequential", Parallelism::Sequential), ("rayon", Parallelism::Rayon)]
}

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_batch");
    let cases = [
        ("dense8", AlgebraDescriptor::dense(8).unwrap()),
        ("group3", AlgebraDescriptor::group(3).unwrap()),
    ];
    for (name, desc) in cases {
        let mut case = BenchCase::square(desc, 32, 3);
        case.batch = 32;
        let net = bench_network(&case).unwrap();
        let xs = bench_inputs(&case);
        for (mode_name, mode) in modes() {
            group.bench_with_input(BenchmarkId::new(name, mode_name), &mode, |b, &mode| {
                b.iter(|| black_box(net.forward_batch(&xs, mode).unwrap()))
            });
        }
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("grad");
    let desc = AlgebraDescriptor::dense(5).unwrap();
    let case = BenchCase::square(desc, 64, 3);
    let net = bench_network(&case).unwrap();
    let examples: Vec<Vec<Example>> = (0..5)
        .map(|j| {
            (0..32)
                .map(|i| {
                    let x: Vec<f64> = (0..64).map(|k| ((i * 7 + k * 3 + j) % 11) as f64 / 11.0).collect();
                    Example::new(Input::real(x), vec![0.5; 64])
                })
                .collect()
        })
        .collect();
    let batch: Vec<SlotBatch<'_>> = examples
        .iter()
        .enumerate()
        .map(|(slot, ex)| SlotBatch {
            slot,
            examples: ex.iter().collect(),
        })
        .collect();
    let spec = LossSpec::new(LossKind::MseDiagonal);
    for (mode_name, mode) in modes() {
        group.bench_with_input(BenchmarkId::new("dense5", mode_name), &mode, |b, &mode| {
            b.iter(|| black_box(grad(&net, &batch, &spec, mode).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, forward, gradient);
criterion_main!(benches);
