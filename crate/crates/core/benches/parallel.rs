use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hypernet::nets::{mlp_eval, mlp_init, Activation, InitScheme, MlpSpec};
use hypernet::par::{map_indexed, map_indexed_seq};
use hypernet::rng::derived;
use rand::Rng;
use std::hint::black_box;

/// One unit of work: a fresh network evaluated on a batch of inputs, the same
/// shape as one repetition of an experiment at toy size.
fn work(spec: &MlpSpec, i: usize) -> f64 {
    let mut rng = derived(7, &[i as u64]);
    let p = mlp_init(spec, InitScheme::HeUniform, &mut rng);
    (0..64)
        .map(|_| {
            let x: Vec<f64> = (0..spec.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            mlp_eval(spec, p.values(), &x).unwrap()[0]
        })
        .sum()
}

fn bench(c: &mut Criterion) {
    let spec = MlpSpec::new(vec![64, 128, 128, 1], Activation::Relu).unwrap();
    let mut group = c.benchmark_group("map_indexed");
    for n in [4usize, 16] {
        group.bench_with_input(BenchmarkId::new("rayon", n), &n, |b, &n| {
            b.iter(|| black_box(map_indexed(n, |i| work(&spec, i))))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| black_box(map_indexed_seq(n, |i| work(&spec, i))))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
