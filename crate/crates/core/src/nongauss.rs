//! Covariance-matrix analytics: antiflatness, Williamson spectra, non-Gaussian entropy,
//! typical-state values and the random-matrix model of typical covariance matrices.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::algebra::{i_pow, majorana_bits_to_pauli, majorana_product_sign, pauli_to_majorana, parity_operator};
use crate::dense_state::{expectation, StateVector};
use crate::error::{Error, Result};

/// Antisymmetry tolerance for [`CovarianceMatrix::new`].
pub const ANTISYMMETRY_TOL: f64 = 1e-10;
/// Largest singular value accepted as physical.
pub const PHYSICAL_TOL: f64 = 1e-8;
/// Relative gap allowed between the two members of a Williamson pair.
pub const PAIRING_TOL: f64 = 1e-6;

/// Real antisymmetric `2N × 2N` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    m: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Validates shape and antisymmetry.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        if m.nrows() % 2 != 0 {
            return Err(Error::OddDimension(m.nrows()));
        }
        let dev = (&m + m.transpose()).amax();
        if dev > ANTISYMMETRY_TOL {
            return Err(Error::NotAntisymmetric(dev));
        }
        Ok(Self { m })
    }

    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    /// Vacuum covariance `⊕ [[0,1],[−1,0]]`.
    pub fn vacuum(n_qubits: usize) -> Self {
        let mut m = DMatrix::zeros(2 * n_qubits, 2 * n_qubits);
        for k in 0..n_qubits {
            m[(2 * k, 2 * k + 1)] = 1.0;
            m[(2 * k + 1, 2 * k)] = -1.0;
        }
        Self { m }
    }

    pub fn zeros(n_qubits: usize) -> Self {
        Self { m: DMatrix::zeros(2 * n_qubits, 2 * n_qubits) }
    }

    pub fn n_modes(&self) -> usize {
        self.m.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    /// `G M Gᵀ`.
    pub fn transform(&self, g: &DMatrix<f64>) -> Result<Self> {
        if g.nrows() != self.n_modes() || g.ncols() != self.n_modes() {
            return Err(Error::DimensionMismatch { expected: self.n_modes(), found: g.nrows() });
        }
        let mut m = g * &self.m * g.transpose();
        antisymmetrize(&mut m);
        Ok(Self { m })
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.m.nrows() == 0 {
            return Vec::new();
        }
        let mut s: Vec<f64> = self.m.clone().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Largest singular value minus one; positive values flag unphysical input.
    pub fn purity_excess(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0) - 1.0
    }

    /// Row-major CSV, `2N` columns, no header.
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = String::new();
        for i in 0..self.n_modes() {
            line.clear();
            for j in 0..self.n_modes() {
                if j > 0 {
                    line.push(',');
                }
                write!(line, "{:?}", self.m[(i, j)]).expect("string write");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn from_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

pub(crate) fn antisymmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = 0.0;
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] - m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
}

/// `ℱ_k = N − ½ tr[(MᵀM)^k]`, evaluated on singular values.
pub fn faf(m: &CovarianceMatrix, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("FAF index k must be positive".into()));
    }
    Ok(faf_from_singular_values(&m.singular_values(), m.n_qubits(), k))
}

pub(crate) fn faf_from_singular_values(sv: &[f64], n_qubits: usize, k: u32) -> f64 {
    let tr: f64 = sv.iter().map(|s| s.powi(2 * k as i32)).sum();
    n_qubits as f64 - 0.5 * tr
}

/// Williamson eigenvalues `λ_1 ≥ … ≥ λ_N ≥ 0`.
pub fn williamson_eigenvalues(m: &CovarianceMatrix) -> Result<Vec<f64>> {
    let (lams, _) = williamson_with_gap(m)?;
    Ok(lams)
}

/// Williamson eigenvalues plus the worst relative gap inside a singular-value pair.
pub fn williamson_with_gap(m: &CovarianceMatrix) -> Result<(Vec<f64>, f64)> {
    if m.n_modes() % 2 != 0 {
        return Err(Error::OddDimension(m.n_modes()));
    }
    let sv = m.singular_values();
    let mut gap: f64 = 0.0;
    let lams = sv
        .chunks(2)
        .map(|p| {
            let scale = p[0].abs().max(1e-12);
            gap = gap.max((p[0] - p[1]).abs() / scale);
            0.5 * (p[0] + p[1])
        })
        .collect();
    Ok((lams, gap))
}

/// `NGE_∞ = −Σ log₂[((1+λ)/2)² + ((1−λ)/2)²]`.
pub fn nge_infinity(m: &CovarianceMatrix) -> Result<f64> {
    let lams = williamson_eigenvalues(m)?;
    nge_from_williamson(&lams)
}

pub fn nge_from_williamson(lams: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in lams {
        if l > 1.0 + PHYSICAL_TOL {
            return Err(Error::Unphysical(format!("Williamson eigenvalue {l} exceeds 1")));
        }
        let l = l.min(1.0);
        s -= (0.5 * (1.0 + l * l)).log2();
    }
    Ok(s.max(0.0))
}

/// Qubit cap for [`nge_finite_q`].
pub const NGE_Q_MAX_QUBITS: usize = 6;

/// Rényi-2 non-Gaussian entropy after `q` fermionic self-convolutions.
///
/// The state is tracked through its Majorana coefficients `⟨γ_S⟩`; one convolution maps
/// `⟨γ_A⟩ ↦ 2^{−|A|/2} Σ_{B⊆A} ε(B) ⟨γ_{A∖B} P^{|B|}⟩⟨γ_B⟩`, with `P` the parity string
/// that the second-copy Jordan–Wigner strings carry through the first copy.
pub fn nge_finite_q(psi: &StateVector, q: u32) -> Result<f64> {
    let n = psi.n_qubits();
    if n > NGE_Q_MAX_QUBITS {
        return Err(Error::SizeCap { n, cap: NGE_Q_MAX_QUBITS });
    }
    let mut coeffs = majorana_coefficients(psi);
    for _ in 0..q {
        coeffs = self_convolve(&coeffs, n);
    }
    let purity: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / (1u64 << n) as f64;
    Ok((-purity.log2()).max(0.0))
}

/// `⟨γ_S⟩` for every subset `S` of the `2N` modes, indexed by bitmask (bit `m−1` ↔ mode `m`).
pub fn majorana_coefficients(psi: &StateVector) -> Vec<Complex64> {
    let n = psi.n_qubits();
    let total = 1usize << (2 * n);
    (0..total)
        .map(|mask| {
            let (p, _) = majorana_bits_to_pauli(&[mask as u64], n);
            expectation(psi, &p).expect("matching size")
        })
        .collect()
}

fn self_convolve(c: &[Complex64], n: usize) -> Vec<Complex64> {
    let n_modes = 2 * n;
    let all = (1u64 << n_modes) - 1;
    // P = i^{p} γ_all
    let (pbits, pc) = pauli_to_majorana(&parity_operator(n));
    debug_assert_eq!(pbits[0], all);
    let p_phase = i_pow(pc);
    let mut out = vec![Complex64::new(0.0, 0.0); c.len()];
    for a in 0..c.len() as u64 {
        let size = a.count_ones();
        let scale = 0.5f64.powf(size as f64 / 2.0);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut b = a;
        loop {
            let rest = a & !b;
            let second = c[b as usize];
            if second.norm_sqr() > 0.0 {
                let mut sign = reorder_odd(b, rest);
                let first = if b.count_ones() % 2 == 0 {
                    c[rest as usize]
                } else {
                    // γ_rest · P = i^{p} (±) γ_{rest ⊕ all}
                    if majorana_product_sign(&[rest], &[all]) {
                        sign = !sign;
                    }
                    p_phase * c[(rest ^ all) as usize]
                };
                let term = first * second;
                acc += if sign { -term } else { term };
            }
            if b == 0 {
                break;
            }
            b = (b - 1) & a;
        }
        out[a as usize] = acc * scale;
    }
    out
}

/// Parity of the number of pairs `(x ∈ primed, y ∈ unprimed)` with `x < y`.
fn reorder_odd(primed: u64, unprimed: u64) -> bool {
    let mut count = 0u32;
    let mut rest = primed;
    while rest != 0 {
        let x = rest.trailing_zeros();
        rest &= rest - 1;
        count += (unprimed >> x >> 1).count_ones();
    }
    count % 2 == 1
}

/// Parity sector of the Haar ensemble behind a typical value.
pub use crate::dense_state::Sector;

/// Exact typical value as a reduced fraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypicalFafTable {
    pub n: usize,
    pub k: u32,
    pub sector: Sector,
    pub value: BigRational,
}

impl TypicalFafTable {
    pub fn as_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }
}

/// Haar-average `ℱ_k` for `k ∈ {1, 2}` in exact rational arithmetic.
pub fn typical_faf_exact(n: usize, k: u32, sector: Sector) -> Result<TypicalFafTable> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if !(1..=2).contains(&k) {
        return Err(Error::Unsupported(format!("closed form only for k ∈ {{1,2}}, got k={k}; use leading_typical_faf")));
    }
    let big = |v: i64| BigRational::from_integer(BigInt::from(v));
    let nn = big(n as i64);
    let value = if sector == Sector::EvenParity && n <= 3 {
        BigRational::zero()
    } else {
        let d = match sector {
            Sector::Generic => BigRational::from_integer(BigInt::from(1) << n),
            Sector::EvenParity => BigRational::from_integer(BigInt::from(1) << (n - 1)),
        };
        let pairs = &nn * (big(2) * &nn - big(1));
        match k {
            1 => &nn - pairs / (&d + big(1)),
            _ => {
                let den = (&d + big(1)) * (&d + big(2)) * (&d + big(3));
                let poly = big(-8) * &nn * &nn + big(4) * &nn * (&d + big(7)) - &d - big(14);
                &nn - pairs * poly / den
            }
        }
    };
    Ok(TypicalFafTable { n, k, sector, value })
}

/// [`typical_faf_exact`] as a float.
pub fn typical_faf(n: usize, k: u32, sector: Sector) -> Result<f64> {
    Ok(typical_faf_exact(n, k, sector)?.as_f64())
}

/// Catalan number `C_k`.
pub fn catalan(k: u32) -> u128 {
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c
}

/// `N − C_k 2^k N^{k+1} / d^k`.
pub fn leading_typical_faf(n: usize, k: u32, sector: Sector) -> f64 {
    let d = match sector {
        Sector::Generic => 2f64.powi(n as i32),
        Sector::EvenParity => 2f64.powi(n as i32 - 1),
    };
    let nf = n as f64;
    nf - catalan(k) as f64 * 2f64.powi(k as i32) * nf.powi(k as i32 + 1) / d.powi(k as i32)
}

/// Antisymmetric matrix with i.i.d. `N(0, σ²)` entries above the diagonal.
pub fn random_covariance<R: Rng + ?Sized>(n_qubits: usize, sigma2: f64, rng: &mut R) -> Result<CovarianceMatrix> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidArgument(format!("variance must be non-negative, got {sigma2}")));
    }
    let n_modes = 2 * n_qubits;
    let mut m = DMatrix::zeros(n_modes, n_modes);
    if sigma2 > 0.0 {
        let dist = Normal::new(0.0, sigma2.sqrt()).expect("finite std");
        for i in 0..n_modes {
            for j in (i + 1)..n_modes {
                let v = dist.sample(rng);
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
    }
    Ok(CovarianceMatrix { m })
}

/// Moduli `θ_j ≥ 0` of the eigenvalues `±iθ_j` of an antisymmetric matrix.
pub fn antisymmetric_spectrum(m: &CovarianceMatrix) -> Vec<f64> {
    m.singular_values()
}

/// Semicircle density `√(8σ²N − θ²) / (4πσ²N)` on `|θ| ≤ √(8σ²N)`.
pub fn semicircle_density(theta: f64, n_qubits: usize, sigma2: f64) -> f64 {
    let r2 = 8.0 * sigma2 * n_qubits as f64;
    if theta * theta >= r2 {
        return 0.0;
    }
    (r2 - theta * theta).sqrt() / (4.0 * std::f64::consts::PI * sigma2 * n_qubits as f64)
}

/// Cumulative distribution of [`semicircle_density`].
pub fn semicircle_cdf(theta: f64, n_qubits: usize, sigma2: f64) -> f64 {
    let r = (8.0 * sigma2 * n_qubits as f64).sqrt();
    let x = (theta / r).clamp(-1.0, 1.0);
    0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) / std::f64::consts::PI
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Asymptotic KS critical value at significance `alpha` (0.01 or 0.05).
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    let c = if alpha <= 0.01 { 1.628 } else { 1.358 };
    c / (n as f64).sqrt()
}

/// `N − ½ Σ_{i≠j} |⟨γ_iγ_j⟩|²` from a map `(m, n) → ⟨iγ_mγ_n⟩` (1-based, either triangle).
pub fn faf_from_correlators(n_qubits: usize, correlators: &HashMap<(usize, usize), f64>) -> Result<f64> {
    let n_modes = 2 * n_qubits;
    let mut m = DMatrix::<f64>::zeros(n_modes, n_modes);
    let mut seen = DMatrix::<bool>::from_element(n_modes, n_modes, false);
    for (&(a, b), &v) in correlators {
        if a == 0 || b == 0 || a > n_modes || b > n_modes {
            return Err(Error::ModeOutOfRange { mode: a.max(b), n_modes });
        }
        if a == b {
            if v != 0.0 {
                return Err(Error::NotAntisymmetric(v.abs()));
            }
            continue;
        }
        let (i, j) = (a - 1, b - 1);
        if seen[(j, i)] && (m[(j, i)] + v).abs() > ANTISYMMETRY_TOL {
            return Err(Error::NotAntisymmetric((m[(j, i)] + v).abs()));
        }
        m[(i, j)] = v;
        m[(j, i)] = -v;
        seen[(i, j)] = true;
        seen[(j, i)] = true;
    }
    let mut s = 0.0;
    for i in 0..n_modes {
        for j in 0..n_modes {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    Ok(n_qubits as f64 - 0.5 * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense_state::{covariance_matrix, prepare_named, NamedState};

    #[test]
    fn vacuum_values() {
        let m = CovarianceMatrix::vacuum(4);
        assert!(faf(&m, 1).unwrap().abs() < 1e-12);
        assert!(williamson_eigenvalues(&m).unwrap().iter().all(|l| (l - 1.0).abs() < 1e-14));
        assert!(nge_infinity(&m).unwrap().abs() < 1e-12);
        let z = CovarianceMatrix::zeros(3);
        assert_eq!(faf(&z, 2).unwrap(), 3.0);
        assert!((nge_infinity(&z).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn psi_theta_faf() {
        for &theta in &[0.0, 0.4, 1.3, std::f64::consts::PI] {
            let m = covariance_matrix(&prepare_named(NamedState::PsiTheta { theta }).unwrap());
            for k in 1..=3 {
                let want = 4.0 * (1.0 - (theta / 2.0).cos().powi(2 * k as i32));
                assert!((faf(&m, k).unwrap() - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn typical_small_cases() {
        let t = typical_faf_exact(4, 1, Sector::Generic).unwrap();
        assert_eq!(t.value, BigRational::new(BigInt::from(40), BigInt::from(17)));
        assert_eq!(typical_faf(3, 1, Sector::EvenParity).unwrap(), 0.0);
        assert_eq!(typical_faf(3, 2, Sector::EvenParity).unwrap(), 0.0);
        assert!((typical_faf(1, 1, Sector::Generic).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(typical_faf(5, 3, Sector::Generic), Err(Error::Unsupported(_))));
        let big = typical_faf(64, 2, Sector::Generic).unwrap();
        assert!(big > 63.99 && big <= 64.0);
    }

    #[test]
    fn catalan_numbers() {
        assert_eq!((1..=5).map(catalan).collect::<Vec<_>>(), vec![1, 2, 5, 14, 42]);
    }

    #[test]
    fn rejects_bad_input() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(CovarianceMatrix::new(m), Err(Error::NotAntisymmetric(_))));
        assert!(matches!(CovarianceMatrix::new(DMatrix::zeros(3, 3)), Err(Error::OddDimension(3))));
        let mut big = CovarianceMatrix::vacuum(1).into_matrix();
        big *= 2.0;
        let big = CovarianceMatrix::new(big).unwrap();
        assert!(matches!(nge_infinity(&big), Err(Error::Unphysical(_))));
    }

    #[test]
    fn csv_round_trip() {
        let m = covariance_matrix(&prepare_named(NamedState::PsiTheta { theta: 0.3 }).unwrap());
        let mut buf = Vec::new();
        m.to_csv(&mut buf).unwrap();
        let back = CovarianceMatrix::from_csv(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn nge_q_zero_and_gaussian() {
        let psi = prepare_named(NamedState::PsiTheta { theta: 1.1 }).unwrap();
        assert!(nge_finite_q(&psi, 0).unwrap().abs() < 1e-12);
        let vac = prepare_named(NamedState::Vacuum { n: 3 }).unwrap();
        for q in 0..4 {
            assert!(nge_finite_q(&vac, q).unwrap().abs() < 1e-12);
        }
    }
}
