use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use faf_core::ed_lab::{chebyshev_evolve, ground_state, sector_dim, Model, ModelSpec, SpinHamiltonian};
use faf_core::free_fermion::Boundary;
use num_complex::Complex64;
use std::hint::black_box;

fn lanczos(c: &mut Criterion) {
    let mut g = c.benchmark_group("ground_state");
    g.sample_size(10);
    for n in [10usize, 14] {
        let h = SpinHamiltonian::build(&ModelSpec::new(Model::Annni { lambda: 0.3 }, n, 1.0, Boundary::Periodic)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &h, |b, h| b.iter(|| ground_state(black_box(h)).unwrap()));
    }
    g.finish();
}

fn chebyshev(c: &mut Criterion) {
    let n = 12;
    let h = SpinHamiltonian::build(&ModelSpec::new(Model::Impurity { lambda: 0.5, site: None }, n, 1.0, Boundary::Periodic)).unwrap();
    let mut psi = vec![Complex64::new(0.0, 0.0); sector_dim(n)];
    psi[0] = Complex64::new(1.0, 0.0);
    let mut g = c.benchmark_group("chebyshev_evolve");
    g.sample_size(10);
    g.bench_function("n12_t10", |b| b.iter(|| chebyshev_evolve(&h, black_box(&psi), 10.0, 1e-12).unwrap()));
    g.finish();
}

criterion_group!(benches, lanczos, chebyshev);
criterion_main!(benches);
