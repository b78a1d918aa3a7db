use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use faf_core::stabilizer_mc::{mc_faf1, CircuitBuilder, Symmetry};
use std::hint::black_box;

fn brickwall(c: &mut Criterion) {
    let mut g = c.benchmark_group("mc_faf1_brickwall");
    g.sample_size(20);
    for n in [16usize, 64] {
        let builder = CircuitBuilder::brickwall(n, Symmetry::Generic);
        g.bench_with_input(BenchmarkId::from_parameter(n), &builder, |b, builder| {
            b.iter(|| mc_faf1(black_box(builder), n, 64, 7).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, brickwall);
criterion_main!(benches);
