//! Dense state vectors for exact small-N work.
//!
//! Basis state `|x_1 … x_N⟩` is stored at the integer whose most significant bit is `x_1`.

use std::io::{Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::algebra::{i_pow, majorana_string, MajoranaIndexSet, PauliOperator};
use crate::error::{Error, Result};
use crate::nongauss::CovarianceMatrix;

static QUBIT_CAP: AtomicUsize = AtomicUsize::new(14);

/// Current hard cap on the number of qubits of a [`StateVector`].
pub fn qubit_cap() -> usize {
    QUBIT_CAP.load(Ordering::Relaxed)
}

/// Raise or lower the dense cap (default 14).
pub fn set_qubit_cap(n: usize) {
    QUBIT_CAP.store(n.min(30), Ordering::Relaxed);
}

fn check_cap(n: usize) -> Result<()> {
    let cap = qubit_cap();
    if n == 0 {
        return Err(Error::InvalidArgument("a state needs at least one qubit".into()));
    }
    if n > cap {
        return Err(Error::SizeCap { n, cap });
    }
    Ok(())
}

/// Normalized amplitude vector on `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

/// Parity sector of a Haar-random state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Generic,
    EvenParity,
}

/// Named states with closed-form FAF values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NamedState {
    Vacuum { n: usize },
    /// `½(|0000⟩ + |0011⟩ + |1100⟩ + e^{iθ}|1111⟩)`.
    PsiTheta { theta: f64 },
    /// `|Ψ_θ⟩^{⊗N/4}`.
    PsiThetaProduct { theta: f64, n: usize },
    /// `(cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩)^{⊗N}`.
    TProduct { theta: f64, phi: f64, n: usize },
    /// `√(a_N/2)(|θ⟩^{⊗N} + |−θ⟩^{⊗N})` with `|θ⟩ = cos(θ/2)|0⟩ − sin(θ/2)|1⟩`.
    PeGround { theta: f64, n: usize },
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_cap(n_qubits)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Computational basis state with index `index` (qubit 1 most significant).
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_cap(n_qubits)?;
        if index >= 1 << n_qubits {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Normalizes the given amplitudes; rejects the zero vector.
    pub fn from_amplitudes(n_qubits: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        check_cap(n_qubits)?;
        if amps.len() != 1 << n_qubits {
            return Err(Error::DimensionMismatch { expected: 1 << n_qubits, found: amps.len() });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `P|ψ⟩` for a Pauli string `P`.
    pub fn apply_pauli(&self, op: &PauliOperator) -> Result<Self> {
        self.check_op(op)?;
        let (xm, zm) = op.basis_masks();
        let c = i_pow(op.phase_power());
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (b, a) in self.amps.iter().enumerate() {
            let s = if (b as u64 & zm).count_ones() % 2 == 0 { c } else { -c };
            out[(b as u64 ^ xm) as usize] = s * a;
        }
        Ok(Self { n_qubits: self.n_qubits, amps: out })
    }

    fn check_op(&self, op: &PauliOperator) -> Result<()> {
        if op.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, found: op.n_qubits() });
        }
        Ok(())
    }

    /// Kronecker product `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let n = self.n_qubits + other.n_qubits;
        check_cap(n)?;
        let mut amps = Vec::with_capacity(1 << n);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(Self { n_qubits: n, amps })
    }

    /// Binary dump: 8-byte header (u32 N little-endian, 4-byte tag `b"LEc8"`) then
    /// `2^N` pairs of little-endian f64 (re, im).
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n_qubits as u32).to_le_bytes())?;
        w.write_all(DUMP_TAG)?;
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 8];
        r.read_exact(&mut head)?;
        if &head[4..] != DUMP_TAG {
            return Err(Error::Parse("unknown state dump tag".into()));
        }
        let n = u32::from_le_bytes(head[..4].try_into().expect("4 bytes")) as usize;
        check_cap(n)?;
        let mut amps = Vec::with_capacity(1 << n);
        let mut buf = [0u8; 16];
        for _ in 0..1usize << n {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
            amps.push(Complex64::new(re, im));
        }
        Self::from_amplitudes(n, amps)
    }
}

const DUMP_TAG: &[u8; 4] = b"LEc8";

/// `⟨ψ|P|ψ⟩`.
pub fn expectation(psi: &StateVector, op: &PauliOperator) -> Result<Complex64> {
    psi.check_op(op)?;
    let (xm, zm) = op.basis_masks();
    Ok(i_pow(op.phase_power()) * pauli_sum(&psi.amps, xm, zm))
}

/// `Σ_b conj(ψ[b⊕x]) (−1)^{|b∧z|} ψ[b]`.
fn pauli_sum(amps: &[Complex64], xm: u64, zm: u64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (b, a) in amps.iter().enumerate() {
        let t = amps[(b as u64 ^ xm) as usize].conj() * a;
        if (b as u64 & zm).count_ones() % 2 == 0 {
            acc += t;
        } else {
            acc -= t;
        }
    }
    acc
}

/// Imaginary residue above which covariance extraction reports a diagnostic.
pub const COVARIANCE_RESIDUE_TOL: f64 = 1e-10;

/// `M_mn = Re⟨−iγ_mγ_n⟩` for `m ≠ n`.
pub fn covariance_matrix(psi: &StateVector) -> CovarianceMatrix {
    let (m, residue) = covariance_with_residue(psi);
    debug_assert!(residue < 1e-8, "covariance imaginary residue {residue:e}");
    m
}

/// Covariance matrix and the largest discarded imaginary part.
pub fn covariance_with_residue(psi: &StateVector) -> (CovarianceMatrix, f64) {
    let n = psi.n_qubits;
    let n_modes = 2 * n;
    let mut m = DMatrix::zeros(n_modes, n_modes);
    let mut residue: f64 = 0.0;
    for a in 1..=n_modes {
        for b in (a + 1)..=n_modes {
            let s = MajoranaIndexSet::new(n_modes, vec![a, b]).expect("valid pair");
            let p = majorana_string(&s, n).expect("matching size");
            let (xm, zm) = p.basis_masks();
            let v = Complex64::new(0.0, -1.0) * i_pow(p.phase_power()) * pauli_sum(&psi.amps, xm, zm);
            residue = residue.max(v.im.abs());
            m[(a - 1, b - 1)] = v.re;
            m[(b - 1, a - 1)] = -v.re;
        }
    }
    (CovarianceMatrix::new_unchecked(m), residue)
}

/// Apply a dense unitary `u` on the ordered qubit list `qubits` (1-based).
///
/// The first listed qubit is the most significant bit of the gate's local index.
pub fn apply_unitary(psi: &StateVector, u: &DMatrix<Complex64>, qubits: &[usize]) -> Result<StateVector> {
    let k = qubits.len();
    if u.nrows() != 1 << k || u.ncols() != 1 << k {
        return Err(Error::DimensionMismatch { expected: 1 << k, found: u.nrows() });
    }
    for (i, &q) in qubits.iter().enumerate() {
        if q == 0 || q > psi.n_qubits || qubits[..i].contains(&q) {
            return Err(Error::InvalidArgument(format!("bad qubit list {qubits:?}")));
        }
    }
    let dev = max_abs(&(u.adjoint() * u - DMatrix::identity(1 << k, 1 << k)));
    if dev > 1e-10 {
        return Err(Error::NotUnitary(dev));
    }
    let n = psi.n_qubits;
    let shifts: Vec<usize> = qubits.iter().map(|&q| n - q).collect();
    let gate_mask: usize = shifts.iter().map(|s| 1usize << s).sum();
    let local_of = |b: usize| -> usize {
        shifts.iter().fold(0, |acc, &s| (acc << 1) | ((b >> s) & 1))
    };
    let spread = |l: usize| -> usize {
        shifts.iter().enumerate().fold(0, |acc, (i, &s)| acc | (((l >> (k - 1 - i)) & 1) << s))
    };
    let mut out = vec![Complex64::new(0.0, 0.0); psi.amps.len()];
    for (b, a) in psi.amps.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let base = b & !gate_mask;
        let col = local_of(b);
        for row in 0..1 << k {
            out[base | spread(row)] += u[(row, col)] * a;
        }
    }
    Ok(StateVector { n_qubits: n, amps: out })
}

/// Largest entry modulus of a complex matrix.
pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |acc: f64, z| acc.max(z.norm()))
}

/// Haar-random state from a normalized complex Gaussian vector.
pub fn haar_state<R: Rng + ?Sized>(n: usize, sector: Sector, rng: &mut R) -> Result<StateVector> {
    check_cap(n)?;
    let d = 1usize << n;
    let mut amps = Vec::with_capacity(d);
    for b in 0..d {
        let keep = match sector {
            Sector::Generic => true,
            Sector::EvenParity => b.count_ones() % 2 == 0,
        };
        if keep {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            amps.push(Complex64::new(re, im));
        } else {
            amps.push(Complex64::new(0.0, 0.0));
        }
    }
    StateVector::from_amplitudes(n, amps)
}

/// Von Neumann entropy in bits of the first `cut` qubits.
pub fn entanglement_entropy(psi: &StateVector, cut: usize) -> Result<f64> {
    let n = psi.n_qubits;
    if cut == 0 || cut >= n {
        return Err(Error::InvalidArgument(format!("cut {cut} must lie in 1..{n}")));
    }
    let rows = 1usize << cut;
    let cols = 1usize << (n - cut);
    let m = DMatrix::from_fn(rows, cols, |i, j| psi.amps[i * cols + j]);
    let sv = m.singular_values();
    Ok(entropy_bits(sv.iter().map(|s| s * s)))
}

pub(crate) fn entropy_bits(probs: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    for p in probs {
        if p > 1e-300 {
            s -= p * p.log2();
        }
    }
    s.max(0.0)
}

/// Prepare one of the closed-form states.
pub fn prepare_named(name: NamedState) -> Result<StateVector> {
    match name {
        NamedState::Vacuum { n } => StateVector::zero(n),
        NamedState::PsiTheta { theta } => {
            let mut amps = vec![Complex64::new(0.0, 0.0); 16];
            amps[0b0000] = Complex64::new(0.5, 0.0);
            amps[0b0011] = Complex64::new(0.5, 0.0);
            amps[0b1100] = Complex64::new(0.5, 0.0);
            amps[0b1111] = Complex64::from_polar(0.5, theta);
            StateVector::from_amplitudes(4, amps)
        }
        NamedState::PsiThetaProduct { theta, n } => {
            if n == 0 || n % 4 != 0 {
                return Err(Error::InvalidArgument(format!("product of |Ψ_θ⟩ needs N ≡ 0 mod 4, got {n}")));
            }
            check_cap(n)?;
            let block = prepare_named(NamedState::PsiTheta { theta })?;
            let mut psi = block.clone();
            for _ in 1..n / 4 {
                psi = psi.tensor(&block)?;
            }
            Ok(psi)
        }
        NamedState::TProduct { theta, phi, n } => {
            let site = [Complex64::new((theta / 2.0).cos(), 0.0), Complex64::from_polar((theta / 2.0).sin(), phi)];
            product_state(n, &site)
        }
        NamedState::PeGround { theta, n } => {
            check_cap(n)?;
            let c = (theta / 2.0).cos();
            let s = (theta / 2.0).sin();
            let plus = product_state(n, &[Complex64::new(c, 0.0), Complex64::new(-s, 0.0)])?;
            let minus = product_state(n, &[Complex64::new(c, 0.0), Complex64::new(s, 0.0)])?;
            let a_n = 1.0 / (1.0 + theta.cos().powi(n as i32));
            let f = (a_n / 2.0).sqrt();
            let amps: Vec<_> = plus.amps.iter().zip(&minus.amps).map(|(a, b)| (a + b) * f).collect();
            StateVector::from_amplitudes(n, amps)
        }
    }
}

fn product_state(n: usize, site: &[Complex64; 2]) -> Result<StateVector> {
    check_cap(n)?;
    let d = 1usize << n;
    let amps = (0..d)
        .map(|b| {
            let ones = b.count_ones() as i32;
            site[0].powi(n as i32 - ones) * site[1].powi(ones)
        })
        .collect();
    StateVector::from_amplitudes(n, amps)
}

/// Page value `Σ_{k=d_B+1}^{d_A d_B} 1/k − (d_A − 1)/(2 d_B)` in bits, `d_A ≤ d_B`.
pub fn page_entropy(n: usize, cut: usize) -> f64 {
    let a = cut.min(n - cut);
    let da = (1u64 << a) as f64;
    let db = (1u64 << (n - a)) as f64;
    let mut h = 0.0;
    for k in (db as u64 + 1)..=((da * db) as u64) {
        h += 1.0 / k as f64;
    }
    (h - (da - 1.0) / (2.0 * db)) / std::f64::consts::LN_2
}

/// Random two-qubit unitary from QR of a complex Gaussian matrix (phase-fixed).
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let (q, r) = qr.unpack();
    let mut q = q;
    for j in 0..dim {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Expected `⟨iγ_aγ_b⟩` table of `|Ψ_θ⟩`, 1-based modes, upper triangle only.
pub fn psi_theta_correlators(theta: f64) -> Vec<((usize, usize), f64)> {
    let s = theta.sin() / 2.0;
    let c = -(theta / 2.0).cos().powi(2);
    let mut v = Vec::new();
    for off in [0, 4] {
        v.push(((1 + off, 3 + off), s));
        v.push(((2 + off, 4 + off), -s));
        v.push(((1 + off, 4 + off), c));
        v.push(((2 + off, 3 + off), c));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{jordan_wigner, Pauli};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn expectation_examples() {
        let vac = StateVector::zero(3).unwrap();
        let z1 = PauliOperator::from_sites(3, &[(1, Pauli::Z)]).unwrap();
        assert!((expectation(&vac, &z1).unwrap() - 1.0).norm() < 1e-15);
        let theta = 0.7;
        let psi = prepare_named(NamedState::PsiTheta { theta }).unwrap();
        let g = |m| jordan_wigner(m, 4).unwrap();
        let ig13 = g(1).mul(&g(3)).with_phase((g(1).mul(&g(3)).phase_power() + 1) % 4);
        let v = expectation(&psi, &ig13).unwrap();
        assert!((v.re - theta.sin() / 2.0).abs() < 1e-12 && v.im.abs() < 1e-12);
        let ig14 = g(1).mul(&g(4));
        let ig14 = ig14.clone().with_phase((ig14.phase_power() + 1) % 4);
        let v = expectation(&psi, &ig14).unwrap();
        assert!((v.re + (theta / 2.0).cos().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn vacuum_covariance() {
        let m = covariance_matrix(&StateVector::zero(3).unwrap());
        for a in 0..6 {
            for b in 0..6 {
                let want = if b == a + 1 && a % 2 == 0 {
                    1.0
                } else if a == b + 1 && b % 2 == 0 {
                    -1.0
                } else {
                    0.0
                };
                assert_eq!(m.matrix()[(a, b)], want);
            }
        }
    }

    #[test]
    fn apply_x_on_first_qubit() {
        let vac = StateVector::zero(3).unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0].map(|v| Complex64::new(v, 0.0)));
        let out = apply_unitary(&vac, &x, &[1]).unwrap();
        assert!((out.amplitudes()[0b100] - 1.0).norm() < 1e-15);
        let bad = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(apply_unitary(&vac, &bad, &[1]), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn bell_and_product_entropy() {
        let s = 0.5f64.sqrt();
        let bell = StateVector::from_amplitudes(2, vec![s, 0.0, 0.0, s].into_iter().map(|v| Complex64::new(v, 0.0)).collect()).unwrap();
        assert!((entanglement_entropy(&bell, 1).unwrap() - 1.0).abs() < 1e-12);
        let prod = StateVector::zero(4).unwrap();
        assert!(entanglement_entropy(&prod, 2).unwrap().abs() < 1e-12);
        assert!(entanglement_entropy(&prod, 0).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = haar_state(5, Sector::Generic, &mut rng).unwrap();
        let mut buf = Vec::new();
        psi.dump(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 16 * 32);
        let back = StateVector::load(buf.as_slice()).unwrap();
        assert!(back.amplitudes().iter().zip(psi.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(StateVector::zero(40), Err(Error::SizeCap { .. })));
    }
}
