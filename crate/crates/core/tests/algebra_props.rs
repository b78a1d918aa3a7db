use faf_core::algebra::{jordan_wigner, majorana_string, multiply, parity_operator, MajoranaIndexSet, PauliOperator};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn dense_string(n: usize, mask: u64) -> DMatrix<Complex64> {
    majorana_string(&MajoranaIndexSet::from_mask(2 * n, mask).unwrap(), n).unwrap().to_dense()
}

fn dist(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn majoranas_anticommute(n in 1usize..=4, k in 1usize..=8, l in 1usize..=8) {
        prop_assume!(k <= 2 * n && l <= 2 * n);
        let gk = jordan_wigner(k, n).unwrap().to_dense();
        let gl = jordan_wigner(l, n).unwrap().to_dense();
        let anti = &gk * &gl + &gl * &gk;
        let want = DMatrix::<Complex64>::identity(1 << n, 1 << n) * Complex64::new(if k == l { 2.0 } else { 0.0 }, 0.0);
        prop_assert!(dist(&anti, &want) < 1e-12);
    }

    #[test]
    fn string_is_ordered_product(n in 1usize..=3, mask in 1u64..64) {
        let mask = mask & ((1u64 << (2 * n)) - 1);
        prop_assume!(mask != 0);
        let mut product = DMatrix::<Complex64>::identity(1 << n, 1 << n);
        for m in 0..2 * n {
            if mask >> m & 1 == 1 {
                product *= jordan_wigner(m + 1, n).unwrap().to_dense();
            }
        }
        prop_assert!(dist(&product, &dense_string(n, mask)) < 1e-12);
    }

    #[test]
    fn parity_commutes_with_even_strings(n in 1usize..=4, mask in 0u64..256) {
        let mask = mask & ((1u64 << (2 * n)) - 1);
        let p = parity_operator(n);
        let s = majorana_string(&MajoranaIndexSet::from_mask(2 * n, mask).unwrap(), n).unwrap();
        prop_assert_eq!(s.commutes_with(&p), mask.count_ones() % 2 == 0);
    }

    #[test]
    fn symbolic_product_matches_dense(n in 1usize..=3, x1 in 0u64..8, z1 in 0u64..8, x2 in 0u64..8, z2 in 0u64..8, p1 in 0u8..4, p2 in 0u8..4) {
        let m = (1u64 << n) - 1;
        let a = PauliOperator::from_masks(n, vec![x1 & m], vec![z1 & m], p1).unwrap();
        let b = PauliOperator::from_masks(n, vec![x2 & m], vec![z2 & m], p2).unwrap();
        let ab = multiply(&a, &b).unwrap();
        prop_assert!(dist(&ab.to_dense(), &(a.to_dense() * b.to_dense())) < 1e-12);
        prop_assert_eq!(a.commutes_with(&b), dist(&(a.to_dense() * b.to_dense()), &(b.to_dense() * a.to_dense())) < 1e-12);
    }
}

#[test]
fn strings_are_trace_orthogonal() {
    for n in 1..=3usize {
        let d = (1usize << n) as f64;
        let count = 1u64 << (2 * n);
        let dense: Vec<_> = (0..count).map(|m| dense_string(n, m)).collect();
        for s in 0..count as usize {
            for r in 0..count as usize {
                let tr = (&dense[s] * dense[r].adjoint()).trace();
                let want = if s == r { d } else { 0.0 };
                assert!((tr - Complex64::new(want, 0.0)).norm() < 1e-10, "N={n} S={s} R={r}");
            }
        }
    }
}
