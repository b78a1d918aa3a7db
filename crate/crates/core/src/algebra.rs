//! Pauli strings, Majorana strings and the Jordan–Wigner map.
//!
//! Qubits are numbered from 1 (leftmost) to N and Majorana modes from 1 to 2N:
//!
//! ```text
//! γ_{2k-1} = Z_1 ⋯ Z_{k-1} X_k
//! γ_{2k}   = Z_1 ⋯ Z_{k-1} Y_k
//! ```
//!
//! A [`PauliOperator`] is `i^p · ∏_q X_q^{x_q} Z_q^{z_q}` with the X factor to the
//! left of the Z factor on every site. Phases are exact powers of `i`.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) const WORD: usize = 64;

pub(crate) fn n_words(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

#[inline]
pub(crate) fn get_bit(words: &[u64], i: usize) -> bool {
    (words[i / WORD] >> (i % WORD)) & 1 == 1
}

#[inline]
pub(crate) fn set_bit(words: &mut [u64], i: usize, v: bool) {
    let m = 1u64 << (i % WORD);
    if v {
        words[i / WORD] |= m;
    } else {
        words[i / WORD] &= !m;
    }
}

pub(crate) fn popcount_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

/// `i^p` as a complex number.
pub fn i_pow(p: u8) -> Complex64 {
    match p % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Single-site Pauli label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Signed Pauli string on `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliOperator {
    pub(crate) n_qubits: usize,
    pub(crate) x: Vec<u64>,
    pub(crate) z: Vec<u64>,
    pub(crate) phase: u8,
}

impl PauliOperator {
    pub fn identity(n_qubits: usize) -> Self {
        let w = n_words(n_qubits);
        Self { n_qubits, x: vec![0; w], z: vec![0; w], phase: 0 }
    }

    /// Build from packed masks; bit `q-1` of word `(q-1)/64` belongs to qubit `q`.
    pub fn from_masks(n_qubits: usize, x: Vec<u64>, z: Vec<u64>, phase: u8) -> Result<Self> {
        let w = n_words(n_qubits);
        if x.len() != w || z.len() != w {
            return Err(Error::DimensionMismatch { expected: w, found: x.len().max(z.len()) });
        }
        let mut op = Self { n_qubits, x, z, phase: phase % 4 };
        op.clear_padding();
        Ok(op)
    }

    /// Hermitian product of single-site Paulis, e.g. `[(1, X), (3, Y)]`.
    pub fn from_sites(n_qubits: usize, sites: &[(usize, Pauli)]) -> Result<Self> {
        let mut op = Self::identity(n_qubits);
        for &(q, p) in sites {
            if q == 0 || q > n_qubits {
                return Err(Error::InvalidArgument(format!("qubit {q} out of range 1..={n_qubits}")));
            }
            let single = Self::single(n_qubits, q, p);
            op = op.mul(&single);
        }
        Ok(op)
    }

    fn single(n_qubits: usize, q: usize, p: Pauli) -> Self {
        let mut op = Self::identity(n_qubits);
        let i = q - 1;
        match p {
            Pauli::I => {}
            Pauli::X => set_bit(&mut op.x, i, true),
            Pauli::Z => set_bit(&mut op.z, i, true),
            Pauli::Y => {
                // Y = i X Z
                set_bit(&mut op.x, i, true);
                set_bit(&mut op.z, i, true);
                op.phase = 1;
            }
        }
        op
    }

    fn clear_padding(&mut self) {
        let r = self.n_qubits % WORD;
        if r != 0 {
            let m = (1u64 << r) - 1;
            if let Some(last) = self.x.last_mut() {
                *last &= m;
            }
            if let Some(last) = self.z.last_mut() {
                *last &= m;
            }
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn phase_power(&self) -> u8 {
        self.phase
    }

    pub fn x_mask(&self) -> &[u64] {
        &self.x
    }

    pub fn z_mask(&self) -> &[u64] {
        &self.z
    }

    pub fn x_bit(&self, q: usize) -> bool {
        get_bit(&self.x, q - 1)
    }

    pub fn z_bit(&self, q: usize) -> bool {
        get_bit(&self.z, q - 1)
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase % 4;
        self
    }

    /// Site label ignoring the global phase.
    pub fn site(&self, q: usize) -> Pauli {
        match (self.x_bit(q), self.z_bit(q)) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (false, true) => Pauli::Z,
            (true, true) => Pauli::Y,
        }
    }

    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).map(|(a, b)| (a | b).count_ones() as usize).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    /// Number of sites carrying both X and Z (each is a `-iY`).
    pub fn y_count(&self) -> u32 {
        popcount_and(&self.x, &self.z)
    }

    /// `(X^x Z^z)† = (-1)^{|x∧z|} X^x Z^z`, so the operator is Hermitian iff
    /// `phase ≡ |x∧z| (mod 2)`.
    pub fn is_hermitian(&self) -> bool {
        (self.phase as u32 + self.y_count()) % 2 == 0
    }

    /// `true` if the two strings commute.
    pub fn commutes_with(&self, other: &Self) -> bool {
        (popcount_and(&self.x, &other.z) + popcount_and(&self.z, &other.x)) % 2 == 0
    }

    /// Exact product `self · other`; panics on size mismatch (see [`multiply`]).
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n_qubits, other.n_qubits, "qubit count mismatch");
        let swaps = popcount_and(&self.z, &other.x);
        let phase = ((self.phase as u32 + other.phase as u32 + 2 * swaps) % 4) as u8;
        Self {
            n_qubits: self.n_qubits,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect(),
            z: self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect(),
            phase,
        }
    }

    /// In-place right multiplication `self ← self · other`.
    pub fn mul_assign_right(&mut self, other: &Self) {
        let swaps = popcount_and(&self.z, &other.x);
        self.phase = ((self.phase as u32 + other.phase as u32 + 2 * swaps) % 4) as u8;
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a ^= b;
        }
        for (a, b) in self.z.iter_mut().zip(&other.z) {
            *a ^= b;
        }
    }

    pub fn adjoint(&self) -> Self {
        let p = (4 - self.phase as u32 % 4 + 2 * self.y_count()) % 4;
        Self { phase: p as u8, ..self.clone() }
    }

    /// Dense matrix in the computational basis with qubit 1 as the most significant bit.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.n_qubits;
        let d = 1usize << n;
        let (xm, zm) = self.basis_masks();
        let c = i_pow(self.phase);
        let mut m = DMatrix::zeros(d, d);
        for b in 0..d {
            let s = if (b as u64 & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[((b as u64 ^ xm) as usize, b)] = c * s;
        }
        m
    }

    /// X and Z masks in basis-index convention (qubit q ↦ bit N−q); requires N ≤ 64.
    pub fn basis_masks(&self) -> (u64, u64) {
        assert!(self.n_qubits <= 64, "basis masks need at most 64 qubits");
        let n = self.n_qubits;
        let mut xm = 0u64;
        let mut zm = 0u64;
        for q in 1..=n {
            let bit = 1u64 << (n - q);
            if self.x_bit(q) {
                xm |= bit;
            }
            if self.z_bit(q) {
                zm |= bit;
            }
        }
        (xm, zm)
    }
}

impl fmt::Display for PauliOperator {
    /// `+X_1 Z_3`, `-i Y_2`, `+I` for the identity.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Rewrite each XZ pair as -iY to print Hermitian labels.
        let p = (self.phase as u32 + 3 * self.y_count()) % 4;
        let prefix = match p {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{prefix}")?;
        let mut first = true;
        for q in 1..=self.n_qubits {
            let s = match self.site(q) {
                Pauli::I => continue,
                Pauli::X => "X",
                Pauli::Y => "Y",
                Pauli::Z => "Z",
            };
            if !first || p % 2 == 1 {
                write!(f, " ")?;
            }
            write!(f, "{s}_{q}")?;
            first = false;
        }
        if first {
            write!(f, "{}I", if p % 2 == 1 { " " } else { "" })?;
        }
        Ok(())
    }
}

/// Exact product with a dimension check.
pub fn multiply(a: &PauliOperator, b: &PauliOperator) -> Result<PauliOperator> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::DimensionMismatch { expected: a.n_qubits, found: b.n_qubits });
    }
    Ok(a.mul(b))
}

/// Sorted, duplicate-free set of 1-based Majorana indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MajoranaIndexSet {
    n_modes: usize,
    indices: Vec<usize>,
}

impl MajoranaIndexSet {
    pub fn new(n_modes: usize, indices: Vec<usize>) -> Result<Self> {
        if n_modes % 2 != 0 {
            return Err(Error::OddDimension(n_modes));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidIndexSet(format!("indices not strictly increasing: {indices:?}")));
            }
        }
        if let Some(&m) = indices.iter().find(|&&m| m == 0 || m > n_modes) {
            return Err(Error::ModeOutOfRange { mode: m, n_modes });
        }
        Ok(Self { n_modes, indices })
    }

    pub fn empty(n_modes: usize) -> Self {
        Self { n_modes, indices: Vec::new() }
    }

    /// From a bitmask with bit `m-1` for mode `m` (at most 64 modes).
    pub fn from_mask(n_modes: usize, mask: u64) -> Result<Self> {
        let indices = (0..64).filter(|b| (mask >> b) & 1 == 1).map(|b| b + 1).collect();
        Self::new(n_modes, indices)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn bits(&self) -> Vec<u64> {
        let mut w = vec![0u64; n_words(self.n_modes)];
        for &m in &self.indices {
            set_bit(&mut w, m - 1, true);
        }
        w
    }
}

/// Pauli form of a single Majorana operator `γ_mode`.
pub fn jordan_wigner(mode: usize, n_qubits: usize) -> Result<PauliOperator> {
    let n_modes = 2 * n_qubits;
    if mode == 0 || mode > n_modes {
        return Err(Error::ModeOutOfRange { mode, n_modes });
    }
    majorana_string(&MajoranaIndexSet::new(n_modes, vec![mode])?, n_qubits)
}

/// Ordered product `γ_{m1} ⋯ γ_{m|S|}` as a signed Pauli string.
pub fn majorana_string(s: &MajoranaIndexSet, n_qubits: usize) -> Result<PauliOperator> {
    if s.n_modes != 2 * n_qubits {
        return Err(Error::DimensionMismatch { expected: 2 * n_qubits, found: s.n_modes });
    }
    let (op, _) = majorana_bits_to_pauli(&s.bits(), n_qubits);
    Ok(op)
}

/// Fermionic parity `∏_k Z_k`.
pub fn parity_operator(n_qubits: usize) -> PauliOperator {
    let mut op = PauliOperator::identity(n_qubits);
    for i in 0..n_qubits {
        set_bit(&mut op.z, i, true);
    }
    op
}

/// Pauli form of `γ_a` for a Majorana support bitset `a` (bit `m-1` ↔ mode `m`).
///
/// Returns the operator and the number of even modes in `a`, which is the phase power.
/// On qubit k, `x_k = a_{2k-1} ⊕ a_{2k}` and `z_k = a_{2k} ⊕ (parity of a on qubits > k)`.
pub(crate) fn majorana_bits_to_pauli(a: &[u64], n_qubits: usize) -> (PauliOperator, u8) {
    let mut op = PauliOperator::identity(n_qubits);
    let mut above = false;
    let mut evens = 0u32;
    for k in (0..n_qubits).rev() {
        let odd = get_bit(a, 2 * k);
        let even = get_bit(a, 2 * k + 1);
        if odd ^ even {
            set_bit(&mut op.x, k, true);
        }
        if even ^ above {
            set_bit(&mut op.z, k, true);
        }
        if even {
            evens += 1;
        }
        above ^= odd ^ even;
    }
    let p = (evens % 4) as u8;
    op.phase = p;
    (op, p)
}

/// Majorana support and coefficient of a Pauli string: `P = i^c γ_a`.
pub fn pauli_to_majorana(p: &PauliOperator) -> (Vec<u64>, u8) {
    let n = p.n_qubits;
    let mut a = vec![0u64; n_words(2 * n)];
    let mut above = false;
    let mut evens = 0u32;
    for k in (0..n).rev() {
        let x = get_bit(&p.x, k);
        let z = get_bit(&p.z, k);
        let even = z ^ above;
        let odd = x ^ even;
        if odd {
            set_bit(&mut a, 2 * k, true);
        }
        if even {
            set_bit(&mut a, 2 * k + 1, true);
            evens += 1;
        }
        above ^= x;
    }
    let c = ((p.phase as u32 + 4 - evens % 4) % 4) as u8;
    (a, c)
}

/// Parity bit of `σ(a,b)` in `γ_a γ_b = (-1)^{σ(a,b)} γ_{a⊕b}`, where
/// `σ(a,b) = Σ_{j∈b} #{i∈a : i > j}`.
pub fn majorana_product_sign(a: &[u64], b: &[u64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut carry = 0u64; // all-ones if the count of a-bits in higher words is odd
    let mut total = 0u32;
    for w in (0..a.len()).rev() {
        let x = a[w];
        // bit j of s = parity of bits of x at positions ≥ j
        let mut s = x;
        s ^= s >> 1;
        s ^= s >> 2;
        s ^= s >> 4;
        s ^= s >> 8;
        s ^= s >> 16;
        s ^= s >> 32;
        let strictly_above = (s ^ x) ^ carry;
        total += (strictly_above & b[w]).count_ones();
        if x.count_ones() % 2 == 1 {
            carry = !carry;
        }
    }
    total % 2 == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n_modes: usize, idx: &[usize]) -> MajoranaIndexSet {
        MajoranaIndexSet::new(n_modes, idx.to_vec()).unwrap()
    }

    #[test]
    fn jw_examples() {
        let g1 = jordan_wigner(1, 2).unwrap();
        assert_eq!(g1, PauliOperator::from_sites(2, &[(1, Pauli::X)]).unwrap());
        assert_eq!(g1.to_string(), "+X_1");
        let g2 = jordan_wigner(2, 2).unwrap();
        assert_eq!(g2.to_string(), "+Y_1");
        let g3 = jordan_wigner(3, 2).unwrap();
        assert_eq!(g3.to_string(), "+Z_1 X_2");
        assert!(matches!(jordan_wigner(5, 2), Err(Error::ModeOutOfRange { .. })));
    }

    #[test]
    fn string_examples() {
        let id = majorana_string(&MajoranaIndexSet::empty(4), 2).unwrap();
        assert!(id.is_identity());
        assert_eq!(id.phase_power(), 0);
        assert_eq!(majorana_string(&set(2, &[1, 2]), 1).unwrap().to_string(), "+i Z_1");
        assert_eq!(majorana_string(&set(4, &[2, 3]), 2).unwrap().to_string(), "+i X_1 X_2");
    }

    #[test]
    fn multiply_examples() {
        let x = PauliOperator::from_sites(1, &[(1, Pauli::X)]).unwrap();
        let z = PauliOperator::from_sites(1, &[(1, Pauli::Z)]).unwrap();
        assert!(x.mul(&x).is_identity());
        assert_eq!(x.mul(&x).phase_power(), 0);
        assert_eq!(x.mul(&z).to_string(), "-i Y_1");
        assert!(multiply(&x, &PauliOperator::identity(2)).is_err());
    }

    #[test]
    fn display_identity() {
        assert_eq!(PauliOperator::identity(3).to_string(), "+I");
        assert_eq!(PauliOperator::identity(3).with_phase(3).to_string(), "-i I");
    }

    #[test]
    fn product_sign_small() {
        // γ_2 γ_1 = -γ_1 γ_2
        let a = vec![0b10u64];
        let b = vec![0b01u64];
        assert!(majorana_product_sign(&a, &b));
        assert!(!majorana_product_sign(&b, &a));
    }

    #[test]
    fn round_trip_majorana() {
        for mask in 0u64..256 {
            let s = MajoranaIndexSet::from_mask(8, mask).unwrap();
            let p = majorana_string(&s, 4).unwrap();
            let (a, c) = pauli_to_majorana(&p);
            assert_eq!(a[0], mask);
            assert_eq!(c, 0);
        }
    }
}
