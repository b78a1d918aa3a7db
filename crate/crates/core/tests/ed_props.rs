use faf_core::algebra::parity_operator;
use faf_core::dense_state::{covariance_matrix, expectation};
use faf_core::ed_lab::{
    binder_cumulant, chebyshev_evolve, dense_spectrum, dynamics_faf, embed, embed_real, ground_state, ground_state_faf,
    model_terms, perturbative_ground_state, sector_covariance, sector_dim, sector_state, ModelSpec, SpinHamiltonian,
    TimeGrid,
};
use faf_core::free_fermion::{canonical_form, ground_covariance, tfim_hamiltonian, Boundary};
use faf_core::nongauss::faf;
use faf_core::stabilizer_mc::linear_fit;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

/// `e^{-iHt}ψ` through the scaling-and-squaring matrix exponential.
fn exact_evolve(h: &DMatrix<f64>, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let u = h.map(|x| Complex64::new(0.0, -x * t)).exp();
    (u * nalgebra::DVector::from_column_slice(psi)).iter().copied().collect()
}

fn basis_vector(dim: usize, i: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    v[i] = Complex64::new(1.0, 0.0);
    v
}

#[test]
fn sector_indexing_is_a_bijection_onto_even_states() {
    for n in 1..=10usize {
        let mut seen = vec![false; 1 << n];
        for i in 0..sector_dim(n) {
            let b = sector_state(i, 0);
            assert_eq!(b.count_ones() % 2, 0);
            assert_eq!(b >> 1, i);
            assert!(!seen[b]);
            seen[b] = true;
            assert_eq!(sector_state(i, 1).count_ones() % 2, 1);
        }
    }
}

#[test]
fn lambda_zero_spectrum_is_free_fermion() {
    for (n, h) in [(6usize, 0.6), (8, 1.3), (9, 0.9)] {
        let ham = SpinHamiltonian::build(&ModelSpec::tfim(n, h, Boundary::Open)).unwrap();
        let (energies, vecs) = dense_spectrum(&ham).unwrap();
        let cf = canonical_form(&tfim_hamiltonian(n, h, Boundary::Open).unwrap()).unwrap();
        let parity = u32::from(cf.g.determinant() < 0.0);
        let mut ff: Vec<f64> = (0..1u32 << n)
            .filter(|s| s.count_ones() % 2 == parity)
            .map(|s| cf.ground_energy() + (0..n).filter(|m| s >> m & 1 == 1).map(|m| cf.eps[m]).sum::<f64>())
            .collect();
        ff.sort_by(f64::total_cmp);
        let worst = energies.iter().zip(&ff).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "N={n} h={h}: {worst}");
        // ground-state correlators
        let gs: Vec<Complex64> = vecs.column(0).iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let (m, _) = ground_covariance(&tfim_hamiltonian(n, h, Boundary::Open).unwrap()).unwrap();
        if parity == 0 {
            assert!((sector_covariance(n, &gs).unwrap().matrix() - m.matrix()).amax() < 1e-8);
        }
    }
}

#[test]
fn dense_eigenvectors_have_small_residuals() {
    // A chain where the unrefined symmetric eigensolver returns inaccurate vectors.
    let ham = SpinHamiltonian::build(&ModelSpec::tfim(10, 1.5, Boundary::Open)).unwrap();
    let (e, v) = dense_spectrum(&ham).unwrap();
    let dense = ham.to_dense().unwrap();
    for c in 0..e.len() {
        let r = (&dense * v.column(c) - v.column(c) * e[c]).norm();
        assert!(r < 1e-8, "column {c}: residual {r}");
    }
    let overlap = v.transpose() * &v - DMatrix::identity(e.len(), e.len());
    assert!(overlap.amax() < 1e-8);
}

#[test]
fn sector_covariance_matches_full_space() {
    let ham = SpinHamiltonian::build(&ModelSpec::annni(8, 0.7, 0.5, Boundary::Open)).unwrap();
    let gs = ground_state(&ham).unwrap();
    let full = covariance_matrix(&embed(8, &gs.complex_vector()).unwrap());
    assert!((sector_covariance(8, &gs.complex_vector()).unwrap().matrix() - full.matrix()).amax() < 1e-12);
}

#[test]
fn lanczos_matches_dense_ground_energy() {
    for spec in [
        ModelSpec::annni(10, 0.4, 0.3, Boundary::Periodic),
        ModelSpec::impurity(11, 1.0, 1.0, Boundary::Open),
        ModelSpec::tfim(12, 1.0, Boundary::Periodic),
    ] {
        let ham = SpinHamiltonian::build(&spec).unwrap();
        let gs = ground_state(&ham).unwrap();
        let (e, _) = dense_spectrum(&ham).unwrap();
        assert!((gs.energy - e[0]).abs() < 1e-9, "{spec:?}");
        assert!(gs.residual < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn chebyshev_matches_dense_evolution(n in 4usize..=8, start in 0usize..64, t in 0.0f64..40.0, lambda in -1.5f64..1.5, annni in any::<bool>()) {
        let spec = if annni { ModelSpec::annni(n, 0.8, lambda, Boundary::Open) } else { ModelSpec::impurity(n, 1.0, lambda, Boundary::Periodic) };
        let ham = SpinHamiltonian::build(&spec).unwrap();
        let psi = basis_vector(ham.dim(), start % ham.dim());
        let cheb = chebyshev_evolve(&ham, &psi, t, 1e-12).unwrap();
        let exact = exact_evolve(&ham.to_dense().unwrap(), &psi, t);
        let err = cheb.iter().zip(&exact).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn quench_conserves_energy_and_parity(n in 4usize..=10, seed in 0usize..512, lambda in 0.1f64..1.5) {
        let spec = ModelSpec::annni(n, 1.0, lambda, Boundary::Open);
        let ham = SpinHamiltonian::build(&spec).unwrap();
        let initial = sector_state(seed % sector_dim(n), 0);
        let psi0 = basis_vector(ham.dim(), initial >> 1);
        let e0 = ham.energy(&psi0);
        let mut psi = psi0;
        for _ in 0..5 {
            psi = chebyshev_evolve(&ham, &psi, 1.7, 1e-12).unwrap();
            prop_assert!((ham.energy(&psi) - e0).abs() < 1e-8);
            let p = expectation(&embed(n, &psi).unwrap(), &parity_operator(n)).unwrap();
            prop_assert!((p.re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn model_terms_are_hermitian(n in 4usize..=12, lambda in -2.0f64..2.0, h in 0.0f64..2.0, periodic in any::<bool>(), kind in 0u8..3) {
        let bc = if periodic { Boundary::Periodic } else { Boundary::Open };
        let spec = match kind {
            0 => ModelSpec::tfim(n, h, bc),
            1 => ModelSpec::impurity(n, h, lambda, bc),
            _ => ModelSpec::annni(n, h, lambda, bc),
        };
        let (free, inter) = model_terms(&spec).unwrap();
        prop_assert!(free.iter().chain(&inter).all(|(_, p)| p.is_hermitian()));
        if n <= 8 {
            let d = SpinHamiltonian::build(&spec).unwrap().to_dense().unwrap();
            prop_assert!((&d - d.transpose()).amax() < 1e-14);
        }
    }
}

#[test]
fn dynamics_series_reports_small_drift() {
    let spec = ModelSpec::impurity(8, 1.0, 1.0, Boundary::Open);
    let grid = TimeGrid { linear_until: 5.0, t_max: 30.0, ..TimeGrid::default() };
    let times = grid.times().unwrap();
    let series = dynamics_faf(&spec, &[1, 2], &times, (15.0, 30.0), sector_state(37, 0), 1e-10).unwrap();
    assert!(series.energy_drift < 1e-8);
    assert_eq!(series.faf[0].len(), times.len());
    assert!(series.faf[0][0].abs() < 1e-12);
    // odd initial states are rejected
    assert!(dynamics_faf(&spec, &[1], &times, (15.0, 30.0), 1, 1e-10).is_err());
}

#[test]
fn perturbative_state_tracks_exact_ground_state() {
    let lambdas = [0.01, 0.02, 0.04];
    let mut exact = Vec::new();
    for &l in &lambdas {
        let spec = ModelSpec::impurity(10, 2.0, l, Boundary::Open);
        let pert = perturbative_ground_state(&spec, 2).unwrap();
        assert_eq!(pert.excluded, 0);
        let f_pert = faf(&covariance_matrix(&embed_real(10, &pert.vector).unwrap()), 1).unwrap();
        let f_exact = ground_state_faf(&spec, &[1]).unwrap()[0];
        assert!((f_pert / f_exact - 1.0).abs() < 0.05, "lambda {l}: {f_pert} vs {f_exact}");
        exact.push(f_exact);
    }
    let fit = linear_fit(&lambdas.map(f64::ln), &exact.iter().map(|f| f.ln()).collect::<Vec<_>>(), None).unwrap();
    assert!((fit.slope - 2.0).abs() < 0.1);
}

#[test]
fn binder_limits() {
    // deep paramagnet: Gaussian-distributed magnetization gives U -> 0
    let para = ground_state(&SpinHamiltonian::build(&ModelSpec::tfim(10, 5.0, Boundary::Periodic)).unwrap()).unwrap();
    assert!(binder_cumulant(&para.state(10).unwrap()) < 0.1);
    // deep ferromagnet: cat state, U -> 2/3
    let ferro = ground_state(&SpinHamiltonian::build(&ModelSpec::tfim(10, 0.05, Boundary::Periodic)).unwrap()).unwrap();
    assert!((binder_cumulant(&ferro.state(10).unwrap()) - 2.0 / 3.0).abs() < 1e-3);
}
