//! Replica operators `Υ` of the fermionic Gaussian commutant and the overlaps they induce.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::algebra::{majorana_bits_to_pauli, majorana_product_sign, MajoranaIndexSet, PauliOperator};
use crate::dense_state::{haar_state, Sector, StateVector};
use crate::error::{Error, Result};
use crate::free_fermion::{apply_matchgates, random_matchgate_circuit, MatchGate};
use crate::nongauss::majorana_coefficients;

/// Largest number of disjoint tuples a single overlap may enumerate.
pub const TUPLE_BUDGET: u128 = 200_000_000;
/// Largest N for which the full table of `⟨γ_S⟩` is built.
pub const TABLE_MAX_QUBITS: usize = 8;

/// Block sizes `(r_1, …, r_k)` with cyclic closure `A_{k+1} = A_1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplicaSpec {
    r: Vec<usize>,
}

impl ReplicaSpec {
    pub fn new(r: Vec<usize>) -> Result<Self> {
        if r.len() < 2 {
            return Err(Error::InvalidArgument(format!("need at least two replicas, got {}", r.len())));
        }
        if r.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidArgument("block sizes must not all vanish".into()));
        }
        Ok(Self { r })
    }

    pub fn k(&self) -> usize {
        self.r.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.r
    }

    pub fn total(&self) -> usize {
        self.r.iter().sum()
    }

    /// Number of ordered disjoint tuples on `n_modes` modes.
    pub fn tuple_count(&self, n_modes: usize) -> u128 {
        let mut left = n_modes as u128;
        let mut count: u128 = 1;
        for &r in &self.r {
            count = count.saturating_mul(binomial(left, r as u128));
            left = left.saturating_sub(r as u128);
        }
        count
    }

    fn check(&self, n_qubits: usize) -> Result<()> {
        if self.total() > 2 * n_qubits {
            return Err(Error::InvalidArgument(format!("Σr = {} exceeds 2N = {}", self.total(), 2 * n_qubits)));
        }
        if n_qubits > TABLE_MAX_QUBITS {
            return Err(Error::SizeCap { n: n_qubits, cap: TABLE_MAX_QUBITS });
        }
        let c = self.tuple_count(2 * n_qubits);
        if c > TUPLE_BUDGET {
            return Err(Error::Budget(format!("{c} disjoint tuples exceed the budget of {TUPLE_BUDGET}")));
        }
        Ok(())
    }
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// `ζ = Σ_{A_1,…,A_k disjoint} ∏_m ⟨ψ|γ_{A_m} γ_{A_{m+1}}|ψ⟩`.
pub fn zeta_overlap(psi: &StateVector, spec: &ReplicaSpec) -> Result<f64> {
    let n = psi.n_qubits();
    spec.check(n)?;
    let table = majorana_coefficients(psi);
    let z = zeta_from_table(&table, 2 * n, spec);
    if z.im.abs() > 1e-9 * z.re.abs().max(1.0) {
        return Err(Error::Unphysical(format!("overlap has imaginary part {:e}", z.im)));
    }
    Ok(z.re)
}

fn zeta_from_table(table: &[Complex64], n_modes: usize, spec: &ReplicaSpec) -> Complex64 {
    let full = if n_modes == 64 { u64::MAX } else { (1u64 << n_modes) - 1 };
    let firsts = subsets_of(full, spec.r[0]);
    firsts
        .par_iter()
        .map(|&a1| {
            let mut acc = Complex64::new(0.0, 0.0);
            descend(table, spec, 1, a1, a1, full & !a1, Complex64::new(1.0, 0.0), &mut acc);
            acc
        })
        .sum()
}

fn pair_value(table: &[Complex64], a: u64, b: u64) -> Complex64 {
    let v = table[(a | b) as usize];
    if majorana_product_sign(&[a], &[b]) {
        -v
    } else {
        v
    }
}

#[allow(clippy::too_many_arguments)]
fn descend(
    table: &[Complex64],
    spec: &ReplicaSpec,
    level: usize,
    first: u64,
    prev: u64,
    free: u64,
    weight: Complex64,
    acc: &mut Complex64,
) {
    if level == spec.r.len() {
        *acc += weight * pair_value(table, prev, first);
        return;
    }
    for a in subsets_of(free, spec.r[level]) {
        let w = weight * pair_value(table, prev, a);
        if w.norm_sqr() == 0.0 {
            continue;
        }
        descend(table, spec, level + 1, first, a, free & !a, w, acc);
    }
}

/// All `r`-element subsets of the set bits of `pool`, in lexicographic order.
fn subsets_of(pool: u64, r: usize) -> Vec<u64> {
    let bits: Vec<u32> = (0..64).filter(|&b| pool >> b & 1 == 1).collect();
    let len = bits.len();
    if r > len {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.iter().fold(0u64, |m, &i| m | 1 << bits[i]));
        let Some(i) = (0..r).rev().find(|&i| idx[i] < len - r + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `𝒩 = ζ(|𝟎⟩)`.
pub fn normalization(n_qubits: usize, spec: &ReplicaSpec) -> Result<f64> {
    zeta_overlap(&StateVector::zero(n_qubits)?, spec)
}

/// `φ = 𝒩 − ζ`.
pub fn phi_measure(psi: &StateVector, spec: &ReplicaSpec) -> Result<f64> {
    Ok(normalization(psi.n_qubits(), spec)? - zeta_overlap(psi, spec)?)
}

/// `|ζ(Uψ) − ζ(ψ)|` for a given circuit.
pub fn invariance_deviation(psi: &StateVector, spec: &ReplicaSpec, circuit: &[MatchGate]) -> Result<f64> {
    let before = zeta_overlap(psi, spec)?;
    let after = zeta_overlap(&apply_matchgates(psi, circuit)?, spec)?;
    Ok((after - before).abs())
}

/// Worst deviation over `trials` Haar states and random matchgate circuits.
pub fn invariance_check<R: Rng + ?Sized>(spec: &ReplicaSpec, n_qubits: usize, trials: usize, rng: &mut R) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let psi = haar_state(n_qubits, Sector::Generic, rng)?;
        let circuit = random_matchgate_circuit(n_qubits, 6 * n_qubits, rng);
        worst = worst.max(invariance_deviation(&psi, spec, &circuit)?);
    }
    Ok(worst)
}

/// Largest N for dense replica operators on two copies.
pub const DENSE_REPLICA_MAX_QUBITS: usize = 3;

/// Dense `Υ^{(2)}_{r1,r2} = Σ (γ_{A1}γ_{A2}) ⊗ (γ_{A2}γ_{A1})` on `2N` qubits.
pub fn upsilon2_dense(n_qubits: usize, r1: usize, r2: usize) -> Result<DMatrix<Complex64>> {
    if n_qubits > DENSE_REPLICA_MAX_QUBITS {
        return Err(Error::SizeCap { n: n_qubits, cap: DENSE_REPLICA_MAX_QUBITS });
    }
    let n_modes = 2 * n_qubits;
    if r1 + r2 > n_modes {
        return Err(Error::InvalidArgument(format!("r1 + r2 = {} exceeds 2N", r1 + r2)));
    }
    let d = 1usize << (2 * n_qubits);
    let full = (1u64 << n_modes) - 1;
    let mut out = DMatrix::zeros(d, d);
    for a1 in subsets_of(full, r1) {
        for a2 in subsets_of(full & !a1, r2) {
            let left = product_string(a1, a2, n_qubits);
            let right = product_string(a2, a1, n_qubits);
            out += left.to_dense().kronecker(&right.to_dense());
        }
    }
    Ok(out)
}

/// `γ_a γ_b` for disjoint supports as a Pauli string.
fn product_string(a: u64, b: u64, n_qubits: usize) -> PauliOperator {
    let (p, _) = majorana_bits_to_pauli(&[a | b], n_qubits);
    if majorana_product_sign(&[a], &[b]) {
        let ph = (p.phase_power() + 2) % 4;
        p.with_phase(ph)
    } else {
        p
    }
}

/// Outcome of comparing `Υ^{(2)}_{r,m−r}` with `Υ^{(2)}_{m,0}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseReport {
    /// Least-squares factor `c` in `Υ_{r,m−r} ≈ c Υ_{m,0}`.
    pub factor: f64,
    /// Frobenius residual of the fit.
    pub residual: f64,
    /// `(−1)^{r(m−r)} C(m, r)`.
    pub expected: f64,
}

impl CollapseReport {
    pub fn proportional(&self) -> bool {
        self.residual < 1e-9
    }

    pub fn sign_matches(&self) -> bool {
        self.factor.signum() == self.expected.signum()
    }

    pub fn passes(&self) -> bool {
        self.proportional() && (self.factor - self.expected).abs() < 1e-9
    }
}

/// Dense proportionality check `Υ^{(2)}_{r,m−r} ∝ Υ^{(2)}_{m,0}`.
pub fn comm2_collapse(n_qubits: usize, m: usize, r: usize) -> Result<CollapseReport> {
    if r > m {
        return Err(Error::InvalidArgument(format!("need r ≤ m, got r={r}, m={m}")));
    }
    let base = upsilon2_dense(n_qubits, m, 0)?;
    let other = upsilon2_dense(n_qubits, r, m - r)?;
    let nb = base.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let overlap: Complex64 = base.iter().zip(other.iter()).map(|(a, b)| a.conj() * b).sum();
    let c = overlap / nb;
    let residual = (&other - &base * c).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let sign = if (r * (m - r)) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(CollapseReport {
        factor: c.re,
        residual: residual + c.im.abs(),
        expected: sign * binomial(m as u128, r as u128) as f64,
    })
}

/// Boolean form: proportional with factor `(−1)^{r(m−r)} C(m, r)`.
pub fn comm2_collapse_check(n_qubits: usize, m: usize, r: usize) -> Result<bool> {
    Ok(comm2_collapse(n_qubits, m, r)?.passes())
}

/// Rank of the span of all `Υ^{(2)}_{r1,r2}` with `r1 + r2 ≤ 2N`.
pub fn comm2_independent_count(n_qubits: usize) -> Result<usize> {
    let n_modes = 2 * n_qubits;
    let mut columns: Vec<Vec<Complex64>> = Vec::new();
    for m in 0..=n_modes {
        for r in 0..=m {
            columns.push(upsilon2_dense(n_qubits, r, m - r)?.iter().copied().collect());
        }
    }
    let rows = columns[0].len();
    let mat = DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]);
    let gram = mat.adjoint() * &mat;
    let sv = gram.singular_values();
    let top = sv.max();
    Ok(sv.iter().filter(|&&s| s > 1e-9 * top).count())
}

/// Majorana strings left invariant by `rotations` random plane rotations and the reflection `X_N`.
pub fn comm1_scan<R: Rng + ?Sized>(n_qubits: usize, rotations: usize, rng: &mut R) -> Result<Vec<MajoranaIndexSet>> {
    if n_qubits > DENSE_REPLICA_MAX_QUBITS {
        return Err(Error::SizeCap { n: n_qubits, cap: DENSE_REPLICA_MAX_QUBITS });
    }
    let n_modes = 2 * n_qubits;
    let mut circuit = random_matchgate_circuit(n_qubits, rotations, rng);
    circuit.push(MatchGate::ReflectionLast);
    let dim = 1usize << n_qubits;
    let gates = circuit
        .iter()
        .map(|gate| {
            let (c, s, q) = crate::free_fermion::matchgate_pauli(n_qubits, gate)?;
            Ok(DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(c, 0.0) + q.to_dense() * Complex64::new(s, 0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut keep = Vec::new();
    for mask in 0..(1u64 << n_modes) {
        let (p, _) = majorana_bits_to_pauli(&[mask], n_qubits);
        let dense = p.to_dense();
        // invariance under every generator separately
        if gates.iter().all(|u| crate::dense_state::max_abs(&(u.adjoint() * &dense * u - &dense)) < 1e-9) {
            keep.push(MajoranaIndexSet::from_mask(n_modes, mask)?);
        }
    }
    Ok(keep)
}
