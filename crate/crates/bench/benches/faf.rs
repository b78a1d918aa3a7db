use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use faf_core::dense_state::{covariance_matrix, haar_state, Sector};
use faf_core::nongauss::{faf, nge_infinity, random_covariance, typical_faf_exact};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn covariance(c: &mut Criterion) {
    let mut g = c.benchmark_group("covariance");
    for n in [6usize, 10] {
        let psi = haar_state(n, Sector::EvenParity, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &psi, |b, psi| b.iter(|| covariance_matrix(black_box(psi))));
    }
    g.finish();
}

fn faf_k(c: &mut Criterion) {
    let mut g = c.benchmark_group("faf");
    for n in [16usize, 64, 256] {
        let m = random_covariance(n, 1.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        g.bench_with_input(BenchmarkId::new("k2", n), &m, |b, m| b.iter(|| faf(black_box(m), 2).unwrap()));
        g.bench_with_input(BenchmarkId::new("nge", n), &m, |b, m| b.iter(|| nge_infinity(black_box(m)).unwrap()));
    }
    g.finish();
}

fn typical(c: &mut Criterion) {
    c.bench_function("typical_faf_exact/n64_k4", |b| {
        b.iter(|| typical_faf_exact(black_box(64), 4, Sector::Generic).unwrap())
    });
}

criterion_group!(benches, covariance, faf_k, typical);
criterion_main!(benches);
