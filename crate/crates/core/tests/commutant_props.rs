use std::f64::consts::PI;

use faf_core::commutant::{
    comm1_scan, comm2_collapse_check, comm2_independent_count, normalization, phi_measure, zeta_overlap, ReplicaSpec,
};
use faf_core::algebra::{majorana_string, MajoranaIndexSet};
use faf_core::dense_state::{covariance_matrix, expectation, haar_state, prepare_named, NamedState, Sector, StateVector};
use faf_core::free_fermion::{apply_matchgates, random_matchgate_circuit};
use faf_core::nongauss::faf;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec(r: &[usize]) -> ReplicaSpec {
    ReplicaSpec::new(r.to_vec()).unwrap()
}

/// `Σ_{a,b,c,d distinct} M_ab M_bc M_cd M_da`: the four-singleton contraction written out on the covariance.
fn quartic_singletons(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    let mut s = 0.0;
    for a in 0..d {
        for b in (0..d).filter(|&b| b != a) {
            for c in (0..d).filter(|&c| c != a && c != b) {
                for e in (0..d).filter(|&e| e != a && e != b && e != c) {
                    s += m[(a, b)] * m[(b, c)] * m[(c, e)] * m[(e, a)];
                }
            }
        }
    }
    s
}

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let c = random_matchgate_circuit(n, 8 * n, rng);
    apply_matchgates(&StateVector::zero(n).unwrap(), &c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pair_overlap_is_covariance_norm(seed in any::<u64>(), n in 2usize..=5) {
        let psi = haar_state(n, Sector::Generic, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let m = covariance_matrix(&psi);
        let zeta = zeta_overlap(&psi, &spec(&[1, 1])).unwrap();
        prop_assert!((zeta - (m.matrix().transpose() * m.matrix()).trace()).abs() < 1e-9);
        prop_assert!((phi_measure(&psi, &spec(&[1, 1])).unwrap() - 2.0 * faf(&m, 1).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn quartic_overlap_matches_covariance_polynomial(seed in any::<u64>(), n in 2usize..=4) {
        let psi = haar_state(n, Sector::Generic, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let zeta = zeta_overlap(&psi, &spec(&[1, 1, 1, 1])).unwrap();
        prop_assert!((zeta - quartic_singletons(covariance_matrix(&psi).matrix())).abs() < 1e-9);
    }

    #[test]
    fn gaussian_states_attain_normalization(seed in any::<u64>(), n in 2usize..=4, r in 0usize..4) {
        let blocks = [vec![1, 1], vec![2, 2], vec![1, 3], vec![2, 0]][r].clone();
        let psi = gaussian(n, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(phi_measure(&psi, &spec(&blocks)).unwrap().abs() < 1e-9);
    }

    #[test]
    fn pair_overlap_is_bounded_by_normalization(seed in any::<u64>(), n in 2usize..=5) {
        let psi = haar_state(n, Sector::EvenParity, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let s = spec(&[1, 1]);
        let zeta = zeta_overlap(&psi, &s).unwrap();
        prop_assert!(zeta > 0.0 && zeta <= normalization(n, &s).unwrap() + 1e-9);
    }

    #[test]
    fn two_two_overlap_is_weight_on_four_body_strings(seed in any::<u64>(), n in 2usize..=4) {
        let psi = haar_state(n, Sector::Generic, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let modes = 2 * n;
        let mut weight = 0.0;
        for mask in (0..1u64 << modes).filter(|m| m.count_ones() == 4) {
            let s = MajoranaIndexSet::from_mask(modes, mask).unwrap();
            weight += expectation(&psi, &majorana_string(&s, n).unwrap()).unwrap().norm_sqr();
        }
        // each 4-set splits into 6 ordered pairs of disjoint 2-sets
        prop_assert!((zeta_overlap(&psi, &spec(&[2, 2])).unwrap() - 6.0 * weight).abs() < 1e-9);
    }
}

#[test]
fn normalization_values() {
    for n in 2..=5 {
        assert!((normalization(n, &spec(&[1, 1])).unwrap() - 2.0 * n as f64).abs() < 1e-12);
        assert_eq!(normalization(n, &spec(&[1, 2])).unwrap(), 0.0);
    }
}

#[test]
fn quartic_singletons_are_not_rotation_invariant() {
    // Even for a Gaussian covariance the contraction depends on the orthogonal frame.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vacuum = StateVector::zero(3).unwrap();
    let rotated = gaussian(3, &mut rng);
    let s = spec(&[1, 1, 1, 1]);
    let before = zeta_overlap(&vacuum, &s).unwrap();
    let after = zeta_overlap(&rotated, &s).unwrap();
    assert_eq!(before, 0.0);
    assert!((after - quartic_singletons(covariance_matrix(&rotated).matrix())).abs() < 1e-9);
    assert!(after.abs() > 1e-3);
}

#[test]
fn two_two_measure_blind_spot_is_specific_to_six_qubits() {
    for theta in [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
        let psi = prepare_named(NamedState::PsiTheta { theta }).unwrap();
        let six = psi.tensor(&StateVector::zero(2).unwrap()).unwrap();
        assert!(phi_measure(&six, &spec(&[2, 2])).unwrap().abs() < 1e-9);
        assert!(faf(&covariance_matrix(&six), 1).unwrap() > 0.1);
        assert!(phi_measure(&psi, &spec(&[2, 2])).unwrap().abs() > 1e-6, "N=4, theta={theta}");
        let five = psi.tensor(&StateVector::zero(1).unwrap()).unwrap();
        assert!(phi_measure(&five, &spec(&[2, 2])).unwrap().abs() > 1e-6, "N=5, theta={theta}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let psi = haar_state(6, Sector::EvenParity, &mut rng).unwrap();
        assert!(phi_measure(&psi, &spec(&[2, 2])).unwrap().abs() < 1e-9);
    }
}

#[test]
fn second_commutant_structure() {
    assert_eq!(comm2_independent_count(2).unwrap(), 5);
    for m in 0..=4 {
        for r in 0..=m {
            assert!(comm2_collapse_check(2, m, r).unwrap(), "m={m} r={r}");
        }
    }
}

#[test]
fn first_commutant_is_trivial() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 1..=3 {
        let kept = comm1_scan(n, 12 * n, &mut rng).unwrap();
        assert_eq!(kept.len(), 1);
        assert!(kept[0].is_empty());
    }
}
