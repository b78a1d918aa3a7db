//! Stabilizer-tableau Monte Carlo for ℱ_1 under random two-qubit Clifford circuits.
//!
//! Uniform two-qubit Cliffords form a unitary 2-design, so ℱ_1 averages over Clifford
//! brick-walls and staircases equal the Haar-gate averages while staying polynomial in N.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{get_bit, majorana_product_sign, pauli_to_majorana, set_bit, PauliOperator};
use crate::dense_state::{apply_unitary, Sector, StateVector};
use crate::harness::stream_rng;
use crate::nongauss::{typical_faf, CovarianceMatrix};
use crate::{Error, Result};

pub const CLIFFORD2_ORDER: usize = 11520;
pub const CLIFFORD2_Z2_ORDER: usize = 384;

// Two-qubit Pauli `i^phase X_a^b0 Z_a^b1 X_b^b2 Z_b^b3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Local {
    bits: u8,
    phase: u8,
}

impl Local {
    const ONE: Local = Local { bits: 0, phase: 0 };

    fn mul(self, o: Local) -> Local {
        let sa = (self.bits >> 1) & o.bits & 1;
        let sb = (self.bits >> 3) & (o.bits >> 2) & 1;
        Local { bits: self.bits ^ o.bits, phase: (self.phase + o.phase + 2 * (sa + sb)) % 4 }
    }

    fn to_pauli(self) -> PauliOperator {
        let x = (self.bits & 1) as u64 | ((((self.bits >> 2) & 1) as u64) << 1);
        let z = ((self.bits >> 1) & 1) as u64 | ((((self.bits >> 3) & 1) as u64) << 1);
        PauliOperator::from_masks(2, vec![x], vec![z], self.phase).expect("two-qubit masks")
    }
}

fn anticommute(a: u8, b: u8) -> bool {
    let f = |u: u8, v: u8| (u & (v >> 1) & 1) ^ ((u >> 1) & v & 1);
    (f(a, b) ^ f(a >> 2, b >> 2)) == 1
}

fn y_count(bits: u8) -> u8 {
    (bits & (bits >> 1) & 1) + ((bits >> 2) & (bits >> 3) & 1)
}

/// Two-qubit Clifford gate stored by its action on `X_a, Z_a, X_b, Z_b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clifford2 {
    index: usize,
    images: [Local; 4],
    table: [Local; 16],
}

impl Clifford2 {
    fn from_images(index: usize, images: [Local; 4]) -> Self {
        let mut table = [Local::ONE; 16];
        for (idx, slot) in table.iter_mut().enumerate() {
            let mut acc = Local::ONE;
            for (g, img) in images.iter().enumerate() {
                if idx >> g & 1 == 1 {
                    acc = acc.mul(*img);
                }
            }
            *slot = acc;
        }
        Self { index, images, table }
    }

    /// Position in the canonical enumeration returned by [`clifford2_group`].
    pub fn index(&self) -> usize {
        self.index
    }

    /// Image of generator `g` (0: X_a, 1: Z_a, 2: X_b, 3: Z_b) as a two-qubit Pauli.
    pub fn image(&self, g: usize) -> PauliOperator {
        self.images[g].to_pauli()
    }

    /// `U P U†` for a two-qubit Pauli `P`.
    pub fn conjugate(&self, p: &PauliOperator) -> Result<PauliOperator> {
        if p.n_qubits != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: p.n_qubits });
        }
        let (x, z) = (p.x[0], p.z[0]);
        let bits = (x & 1 | (z & 1) << 1 | (x >> 1 & 1) << 2 | (z >> 1 & 1) << 3) as u8;
        let img = self.table[bits as usize];
        Ok(img.to_pauli().with_phase((img.phase + p.phase) % 4))
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(g, l)| l.bits == 1 << g && l.phase == 0)
    }

    /// `U (Z⊗Z) U† = Z⊗Z`.
    pub fn commutes_with_zz(&self) -> bool {
        self.images[1].mul(self.images[3]) == Local { bits: 0b1010, phase: 0 }
    }

    /// A 4×4 unitary realizing the gate, up to global phase; qubit `a` is the local MSB.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let one = DMatrix::<Complex64>::identity(4, 4);
        let za = self.images[1].to_pauli().to_dense();
        let zb = self.images[3].to_pauli().to_dense();
        let proj = (&one + za) * (&one + zb) * Complex64::new(0.25, 0.0);
        let col = (0..4)
            .max_by(|&i, &j| proj.column(i).norm().total_cmp(&proj.column(j).norm()))
            .unwrap();
        let v0 = proj.column(col).normalize();
        let xa = self.images[0].to_pauli().to_dense();
        let xb = self.images[2].to_pauli().to_dense();
        let mut u = DMatrix::zeros(4, 4);
        for j in 0..4 {
            let mut v = v0.clone_owned();
            if j & 1 == 1 {
                v = &xb * v;
            }
            if j & 2 == 2 {
                v = &xa * v;
            }
            u.set_column(j, &v);
        }
        u
    }
}

fn enumerate_group() -> Vec<Clifford2> {
    let mut out = Vec::with_capacity(CLIFFORD2_ORDER);
    for xa in 1..16u8 {
        for za in (1..16u8).filter(|&z| anticommute(xa, z)) {
            for xb in (1..16u8).filter(|&b| !anticommute(b, xa) && !anticommute(b, za)) {
                for zb in (1..16u8).filter(|&b| !anticommute(b, xa) && !anticommute(b, za) && anticommute(b, xb)) {
                    let bits = [xa, za, xb, zb];
                    for signs in 0..16u8 {
                        let images = std::array::from_fn(|g| Local {
                            bits: bits[g],
                            phase: (y_count(bits[g]) + 2 * (signs >> g & 1)) % 4,
                        });
                        out.push(Clifford2::from_images(out.len(), images));
                    }
                }
            }
        }
    }
    out
}

/// All 11520 two-qubit Clifford gates modulo global phase, in a fixed order.
pub fn clifford2_group() -> &'static [Clifford2] {
    static GROUP: OnceLock<Vec<Clifford2>> = OnceLock::new();
    GROUP.get_or_init(enumerate_group)
}

/// Indices of the gates commuting with `Z⊗Z`.
pub fn clifford2_z2_indices() -> &'static [usize] {
    static Z2: OnceLock<Vec<usize>> = OnceLock::new();
    Z2.get_or_init(|| clifford2_group().iter().filter(|g| g.commutes_with_zz()).map(|g| g.index).collect())
}

/// Uniform draw from the full group or from the `Z⊗Z`-commuting subgroup.
pub fn sample_clifford2<R: Rng + ?Sized>(symmetric: bool, rng: &mut R) -> &'static Clifford2 {
    let group = clifford2_group();
    if symmetric {
        let sub = clifford2_z2_indices();
        &group[sub[rng.random_range(0..sub.len())]]
    } else {
        &group[rng.random_range(0..group.len())]
    }
}

/// Destabilizer/stabilizer tableau; rows `0..N` destabilizers, `N..2N` stabilizers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilizerTableau {
    n: usize,
    rows: Vec<PauliOperator>,
}

impl StabilizerTableau {
    /// Tableau of `|0…0⟩`.
    pub fn vacuum(n_qubits: usize) -> Self {
        let mut rows = Vec::with_capacity(2 * n_qubits);
        for (bit_x, q) in [true, false].into_iter().flat_map(|b| (0..n_qubits).map(move |q| (b, q))) {
            let mut p = PauliOperator::identity(n_qubits);
            if bit_x {
                set_bit(&mut p.x, q, true);
            } else {
                set_bit(&mut p.z, q, true);
            }
            rows.push(p);
        }
        Self { n: n_qubits, rows }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn destabilizers(&self) -> &[PauliOperator] {
        &self.rows[..self.n]
    }

    pub fn stabilizers(&self) -> &[PauliOperator] {
        &self.rows[self.n..]
    }

    /// Hermitian rows with the standard commutation pattern.
    pub fn is_valid(&self) -> bool {
        let n = self.n;
        for i in 0..2 * n {
            if !self.rows[i].is_hermitian() {
                return false;
            }
            for j in i + 1..2 * n {
                let paired = j == i + n;
                if self.rows[i].commutes_with(&self.rows[j]) == paired {
                    return false;
                }
            }
        }
        true
    }

    /// Conjugate every row by `gate` acting on qubits `a` (local MSB) and `b`, 1-based.
    pub fn apply_clifford(&mut self, gate: &Clifford2, a: usize, b: usize) -> Result<()> {
        if a == 0 || b == 0 || a > self.n || b > self.n || a == b {
            return Err(Error::InvalidArgument(format!("bad qubit pair ({a}, {b}) for N={}", self.n)));
        }
        let (a, b) = (a - 1, b - 1);
        for row in &mut self.rows {
            let idx = get_bit(&row.x, a) as usize
                | (get_bit(&row.z, a) as usize) << 1
                | (get_bit(&row.x, b) as usize) << 2
                | (get_bit(&row.z, b) as usize) << 3;
            if idx == 0 {
                continue;
            }
            let img = gate.table[idx];
            set_bit(&mut row.x, a, img.bits & 1 == 1);
            set_bit(&mut row.z, a, img.bits >> 1 & 1 == 1);
            set_bit(&mut row.x, b, img.bits >> 2 & 1 == 1);
            set_bit(&mut row.z, b, img.bits >> 3 & 1 == 1);
            row.phase = (row.phase + img.phase) % 4;
        }
        debug_assert!(self.n > 12 || self.is_valid());
        Ok(())
    }

    pub fn apply_circuit(&mut self, circuit: &[GateApplication]) -> Result<()> {
        let group = clifford2_group();
        for g in circuit {
            self.apply_clifford(&group[g.gate], g.a, g.b)?;
        }
        Ok(())
    }
}

/// `⟨P⟩ ∈ {−1, 0, 1}` for a Hermitian Pauli string.
pub fn pauli_expectation(tab: &StabilizerTableau, op: &PauliOperator) -> Result<i8> {
    if op.n_qubits != tab.n {
        return Err(Error::DimensionMismatch { expected: tab.n, found: op.n_qubits });
    }
    if !op.is_hermitian() {
        return Err(Error::InvalidArgument(format!("{op} is not Hermitian")));
    }
    if tab.stabilizers().iter().any(|s| !s.commutes_with(op)) {
        return Ok(0);
    }
    let mut acc = PauliOperator::identity(tab.n);
    for (d, s) in tab.destabilizers().iter().zip(tab.stabilizers()) {
        if !d.commutes_with(op) {
            acc.mul_assign_right(s);
        }
    }
    debug_assert!(acc.x == op.x && acc.z == op.z);
    match (op.phase + 4 - acc.phase) % 4 {
        0 => Ok(1),
        2 => Ok(-1),
        _ => Err(Error::Unphysical("imaginary stabilizer expectation".into())),
    }
}

struct ReducedRow {
    bits: Vec<u64>,
    coeff: u8,
    pivot: usize,
}

// Stabilizer generators as `i^c γ_a`, Gauss–Jordan reduced over GF(2) on the Majorana supports.
fn reduced_majorana_rows(tab: &StabilizerTableau, track_phase: bool) -> Vec<ReducedRow> {
    let n = tab.n;
    let mut rows: Vec<(Vec<u64>, u8)> = tab.stabilizers().iter().map(pauli_to_majorana).collect();
    let mut pivots = Vec::with_capacity(n);
    let mut rank = 0;
    for col in 0..2 * n {
        if rank == n {
            break;
        }
        let Some(r) = (rank..n).find(|&r| get_bit(&rows[r].0, col)) else {
            continue;
        };
        rows.swap(rank, r);
        let (pivot_bits, pivot_c) = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == rank || !get_bit(&row.0, col) {
                continue;
            }
            if track_phase {
                let flip = majorana_product_sign(&row.0, &pivot_bits);
                row.1 = (row.1 + pivot_c + if flip { 2 } else { 0 }) % 4;
            }
            for (w, p) in row.0.iter_mut().zip(&pivot_bits) {
                *w ^= p;
            }
        }
        pivots.push(col);
        rank += 1;
    }
    rows.into_iter()
        .zip(pivots)
        .map(|((bits, coeff), pivot)| ReducedRow { bits, coeff, pivot })
        .collect()
}

// Covariance sign of the group element `i^c γ_p γ_q`, p < q.
fn pair_sign(c: u8) -> i8 {
    match (3 + 4 - c % 4) % 4 {
        0 => 1,
        2 => -1,
        _ => unreachable!("anti-Hermitian stabilizer element"),
    }
}

fn collect_pairs(tab: &StabilizerTableau, track_phase: bool) -> Vec<(usize, usize, i8)> {
    let rows = reduced_majorana_rows(tab, track_phase);
    let words = rows.first().map_or(0, |r| r.bits.len());
    let mut pivot_mask = vec![0u64; words];
    for r in &rows {
        set_bit(&mut pivot_mask, r.pivot, true);
    }
    let mut pairs = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        let free: Vec<u64> = r.bits.iter().zip(&pivot_mask).map(|(b, m)| b & !m).collect();
        let weight: u32 = free.iter().map(|w| w.count_ones()).sum();
        match weight {
            0 => {}
            1 => {
                let q = free.iter().enumerate().find(|(_, w)| **w != 0).map(|(k, w)| 64 * k + w.trailing_zeros() as usize).unwrap();
                let (lo, hi) = (r.pivot.min(q), r.pivot.max(q));
                pairs.push((lo + 1, hi + 1, if track_phase { pair_sign(r.coeff) } else { 0 }));
            }
            _ => {
                if let Some(&j) = seen.get(&free) {
                    let o = &rows[j];
                    let sign = if track_phase {
                        let flip = majorana_product_sign(&o.bits, &r.bits);
                        pair_sign((o.coeff + r.coeff + if flip { 2 } else { 0 }) % 4)
                    } else {
                        0
                    };
                    pairs.push((o.pivot + 1, r.pivot + 1, sign));
                } else {
                    seen.insert(free, i);
                }
            }
        }
    }
    pairs
}

/// Majorana pairs `(p, q, M_pq)` with `p < q` (1-based) and `M_pq = ±1`; all other entries vanish.
pub fn majorana_pairs(tab: &StabilizerTableau) -> Vec<(usize, usize, i8)> {
    collect_pairs(tab, true)
}

/// Covariance matrix of a stabilizer state; entries are in {−1, 0, 1}.
pub fn covariance_from_tableau(tab: &StabilizerTableau) -> CovarianceMatrix {
    let d = 2 * tab.n;
    let mut m = DMatrix::zeros(d, d);
    for (p, q, s) in majorana_pairs(tab) {
        m[(p - 1, q - 1)] = s as f64;
        m[(q - 1, p - 1)] = -(s as f64);
    }
    CovarianceMatrix::new_unchecked(m)
}

/// `ℱ_1 = N − #pairs`, which equals `ℱ_k` for every `k` on stabilizer states.
pub fn stabilizer_faf1(tab: &StabilizerTableau) -> f64 {
    (tab.n - collect_pairs(tab, false).len()) as f64
}

/// Gate symmetry class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Generic,
    Z2,
}

impl Symmetry {
    /// Haar ensemble whose ℱ_1 average the circuits approach.
    pub fn sector(self) -> Sector {
        match self {
            Symmetry::Generic => Sector::Generic,
            Symmetry::Z2 => Sector::EvenParity,
        }
    }
}

/// One gate of a sampled circuit: enumeration index and 1-based qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateApplication {
    pub gate: usize,
    pub a: usize,
    pub b: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitKind {
    Brickwall { depth: usize },
    Staircase { r: usize, layers: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitBuilder {
    pub kind: CircuitKind,
    pub symmetry: Symmetry,
}

/// Gate pairs of brick-wall layer `t` (1-based): odd layers `(2i−1, 2i)`, even layers `(2i, 2i+1)`.
pub fn brickwall_layer(n_qubits: usize, t: usize) -> Vec<(usize, usize)> {
    if t % 2 == 1 {
        (1..=n_qubits / 2).map(|i| (2 * i - 1, 2 * i)).collect()
    } else {
        (1..=n_qubits.saturating_sub(1) / 2).map(|i| (2 * i, 2 * i + 1)).collect()
    }
}

impl CircuitBuilder {
    pub fn brickwall(depth: usize, symmetry: Symmetry) -> Self {
        Self { kind: CircuitKind::Brickwall { depth }, symmetry }
    }

    /// Staircase of `(r+1)`-qubit blocks, each a brick-wall of `layers ≥ 2r` layers.
    pub fn staircase(r: usize, layers: usize, symmetry: Symmetry) -> Result<Self> {
        if layers < 2 * r {
            return Err(Error::InvalidArgument(format!("staircase blocks need at least {} layers, got {layers}", 2 * r)));
        }
        Ok(Self { kind: CircuitKind::Staircase { r, layers }, symmetry })
    }

    /// Ordered qubit pairs of the circuit on `n_qubits` qubits.
    pub fn layout(&self, n_qubits: usize) -> Result<Vec<(usize, usize)>> {
        match self.kind {
            CircuitKind::Brickwall { depth } => Ok((1..=depth).flat_map(|t| brickwall_layer(n_qubits, t)).collect()),
            CircuitKind::Staircase { r, layers } => {
                if n_qubits <= r {
                    return Err(Error::InvalidArgument(format!("staircase needs N > r, got N={n_qubits}, r={r}")));
                }
                let mut out = Vec::new();
                for start in 0..n_qubits - r {
                    for t in 1..=layers {
                        out.extend(brickwall_layer(r + 1, t).into_iter().map(|(a, b)| (a + start, b + start)));
                    }
                }
                Ok(out)
            }
        }
    }

    /// Draw every gate of the circuit, in layout order.
    pub fn sample<R: Rng + ?Sized>(&self, n_qubits: usize, rng: &mut R) -> Result<Vec<GateApplication>> {
        let sym = self.symmetry == Symmetry::Z2;
        Ok(self
            .layout(n_qubits)?
            .into_iter()
            .map(|(a, b)| GateApplication { gate: sample_clifford2(sym, rng).index, a, b })
            .collect())
    }
}

/// Dense evolution of `psi` by a sampled circuit (oracle for small N).
pub fn dense_circuit(psi: &StateVector, circuit: &[GateApplication]) -> Result<StateVector> {
    let group = clifford2_group();
    let mut out = psi.clone();
    for g in circuit {
        out = apply_unitary(&out, &group[g.gate].to_dense(), &[g.a, g.b])?;
    }
    Ok(out)
}

/// Sample mean and standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Self { mean, se: (var / n as f64).sqrt(), samples: n }
    }
}

/// Average ℱ_1 over `samples` independent circuits from the vacuum.
pub fn mc_faf1(builder: &CircuitBuilder, n_qubits: usize, samples: usize, seed: u64) -> Result<McEstimate> {
    if samples < 2 {
        return Err(Error::InvalidArgument("at least two samples are required".into()));
    }
    builder.layout(n_qubits)?;
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s);
            let circuit = builder.sample(n_qubits, &mut rng).expect("layout checked");
            let mut tab = StabilizerTableau::vacuum(n_qubits);
            tab.apply_circuit(&circuit).expect("layout checked");
            stabilizer_faf1(&tab)
        })
        .collect();
    Ok(McEstimate::from_samples(&values))
}

/// ℱ_1 averages at every depth `0..=max_depth` of one brick-wall trajectory per sample.
///
/// Entry `t` matches `mc_faf1` on a depth-`t` brick-wall with the same seed.
pub fn brickwall_series(
    n_qubits: usize,
    max_depth: usize,
    symmetry: Symmetry,
    samples: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if samples < 2 {
        return Err(Error::InvalidArgument("at least two samples are required".into()));
    }
    let group = clifford2_group();
    let sym = symmetry == Symmetry::Z2;
    let traces: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s);
            let mut tab = StabilizerTableau::vacuum(n_qubits);
            let mut trace = vec![0.0; max_depth + 1];
            for t in 1..=max_depth {
                for (a, b) in brickwall_layer(n_qubits, t) {
                    let g = sample_clifford2(sym, &mut rng);
                    tab.apply_clifford(&group[g.index], a, b).expect("layer in range");
                }
                trace[t] = stabilizer_faf1(&tab);
            }
            trace
        })
        .collect();
    Ok((0..=max_depth)
        .map(|t| McEstimate::from_samples(&traces.iter().map(|tr| tr[t]).collect::<Vec<_>>()))
        .collect())
}

/// Staircase ensemble with bond dimension `χ = 2^r` and `2r`-layer blocks.
pub fn rmps_faf1(n_qubits: usize, r: usize, symmetry: Symmetry, samples: usize, seed: u64) -> Result<McEstimate> {
    let layers = (2 * r).max(1);
    let gates = (n_qubits.saturating_sub(r)) as f64 * layers as f64 * (r as f64 + 1.0) / 2.0;
    if gates * samples as f64 * n_qubits as f64 > 5e12 {
        return Err(Error::Budget(format!("RMPS run with N={n_qubits}, r={r}, {samples} samples")));
    }
    mc_faf1(&CircuitBuilder::staircase(r, layers, symmetry)?, n_qubits, samples, seed)
}

/// `ℱ^typ_1 − ℱ_1` for an estimate in the Haar ensemble matching `symmetry`.
pub fn faf1_gap(n_qubits: usize, symmetry: Symmetry, est: &McEstimate) -> Result<f64> {
    Ok(typical_faf(n_qubits, 1, symmetry.sector())? - est.mean)
}

/// Least-squares line `y = intercept + slope·x` with Pearson correlation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub correlation: f64,
    pub rms_residual: f64,
}

/// Weighted least squares; `weights = None` gives ordinary least squares.
pub fn linear_fit(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<LinearFit> {
    if xs.len() != ys.len() || weights.is_some_and(|w| w.len() != xs.len()) {
        return Err(Error::DimensionMismatch { expected: xs.len(), found: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("a line needs at least two points".into()));
    }
    let w: Vec<f64> = weights.map_or_else(|| vec![1.0; xs.len()], <[f64]>::to_vec);
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for ((x, y), w) in xs.iter().zip(ys).zip(&w) {
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
        syy += w * (y - my) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let correlation = if syy > 0.0 { sxy / (sxx * syy).sqrt() } else { 1.0 };
    let rms_residual = (xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    Ok(LinearFit { intercept, slope, correlation, rms_residual })
}

/// Decay rate `α` of `y ∝ e^{−α t}` from a log-scale least-squares fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub log_amplitude: f64,
    pub rms_residual: f64,
}

pub fn fit_decay(series: &[(f64, f64)]) -> Result<DecayFit> {
    if series.len() < 5 {
        return Err(Error::InvalidArgument(format!("decay fit needs 5 points, got {}", series.len())));
    }
    if series.iter().any(|&(_, y)| !(y > 0.0) || !y.is_finite()) {
        return Err(Error::InvalidArgument("decay fit needs positive values".into()));
    }
    let ts: Vec<f64> = series.iter().map(|p| p.0).collect();
    let ly: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&ts, &ly, None)?;
    Ok(DecayFit { alpha: -fit.slope, log_amplitude: fit.intercept, rms_residual: fit.rms_residual })
}

/// First time the gap drops below `eps`, interpolated on a log scale between samples.
pub fn saturation_time(ts: &[f64], gaps: &[f64], eps: f64) -> Option<f64> {
    let i = gaps.iter().position(|&g| g < eps)?;
    if i == 0 {
        return Some(ts[0]);
    }
    let (t0, t1, g0, g1) = (ts[i - 1], ts[i], gaps[i - 1], gaps[i]);
    let frac = if g1 > 0.0 { (g0.ln() - eps.ln()) / (g0.ln() - g1.ln()) } else { (g0 - eps) / (g0 - g1) };
    Some(t0 + frac * (t1 - t0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Pauli;

    #[test]
    fn group_sizes() {
        assert_eq!(clifford2_group().len(), CLIFFORD2_ORDER);
        assert_eq!(clifford2_z2_indices().len(), CLIFFORD2_Z2_ORDER);
        assert_eq!(clifford2_group().iter().filter(|g| g.is_identity()).count(), 1);
    }

    #[test]
    fn cnot_then_x() {
        // CNOT(control a): X_a → X_a X_b, Z_a → Z_a, X_b → X_b, Z_b → Z_a Z_b
        let cnot = clifford2_group()
            .iter()
            .find(|g| {
                let b: Vec<u8> = g.images.iter().map(|l| l.bits).collect();
                b == [0b0101, 0b0010, 0b0100, 0b1010] && g.images.iter().all(|l| l.phase == 0)
            })
            .unwrap();
        let x = clifford2_group()
            .iter()
            .find(|g| {
                let b: Vec<u8> = g.images.iter().map(|l| l.bits).collect();
                b == [0b0001, 0b0010, 0b0100, 0b1000] && g.images.iter().map(|l| l.phase).eq([0, 2, 0, 0])
            })
            .unwrap();
        let mut tab = StabilizerTableau::vacuum(2);
        tab.apply_clifford(cnot, 1, 2).unwrap();
        tab.apply_clifford(x, 1, 2).unwrap();
        // |00⟩ → CNOT → |00⟩ → X_1 → |10⟩
        let z1 = PauliOperator::from_sites(2, &[(1, Pauli::Z)]).unwrap();
        let z2 = PauliOperator::from_sites(2, &[(2, Pauli::Z)]).unwrap();
        assert_eq!(pauli_expectation(&tab, &z1).unwrap(), -1);
        assert_eq!(pauli_expectation(&tab, &z2).unwrap(), 1);
        tab.apply_clifford(cnot, 1, 2).unwrap();
        assert_eq!(pauli_expectation(&tab, &z2).unwrap(), -1);
    }

    #[test]
    fn vacuum_expectations() {
        let tab = StabilizerTableau::vacuum(3);
        let z1 = PauliOperator::from_sites(3, &[(1, Pauli::Z)]).unwrap();
        let x1 = PauliOperator::from_sites(3, &[(1, Pauli::X)]).unwrap();
        assert_eq!(pauli_expectation(&tab, &z1).unwrap(), 1);
        assert_eq!(pauli_expectation(&tab, &x1).unwrap(), 0);
        assert!(pauli_expectation(&tab, &x1.clone().with_phase(1)).is_err());
        assert_eq!(stabilizer_faf1(&tab), 0.0);
        assert_eq!(covariance_from_tableau(&tab), CovarianceMatrix::vacuum(3));
    }

    #[test]
    fn brickwall_layout() {
        assert_eq!(brickwall_layer(6, 1), vec![(1, 2), (3, 4), (5, 6)]);
        assert_eq!(brickwall_layer(6, 2), vec![(2, 3), (4, 5)]);
        assert_eq!(brickwall_layer(5, 2), vec![(2, 3), (4, 5)]);
        let st = CircuitBuilder::staircase(2, 4, Symmetry::Generic).unwrap();
        assert_eq!(st.layout(4).unwrap().len(), 2 * 4);
        assert!(CircuitBuilder::staircase(3, 5, Symmetry::Generic).is_err());
    }

    #[test]
    fn decay_fit_recovers_rate() {
        let series: Vec<(f64, f64)> = (0..10).map(|t| (t as f64, 3.0 * (-0.45 * t as f64).exp())).collect();
        let fit = fit_decay(&series).unwrap();
        assert!((fit.alpha - 0.45).abs() < 1e-12);
        assert!(saturation_time(&[0.0, 1.0], &[4.0, 0.25], 1.0).unwrap() - 0.5 < 1e-12);
    }
}
