//! Even-parity exact diagonalization and Chebyshev dynamics for the TFIM, the
//! single-impurity chain and the ANNNI chain.
//!
//! Sector states are computational basis states with an even number of 1-bits. The lowest
//! bit of such a state is fixed by the others, so `index = b >> 1` ranks the sector.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{majorana_string, MajoranaIndexSet, Pauli, PauliOperator};
use crate::dense_state::{entanglement_entropy, StateVector};
use crate::free_fermion::Boundary;
use crate::harness::stream_rng;
use crate::nongauss::{faf, CovarianceMatrix};
use crate::stabilizer_mc::{linear_fit, saturation_time, LinearFit};
use crate::{Error, Result};

/// Largest sector dimension handled by Lanczos.
pub const MAX_SECTOR_DIM: usize = 1 << 21;
/// Largest chain handled by dense diagonalization.
pub const DENSE_MAX_QUBITS: usize = 13;
/// Largest chain accepted by [`dynamics_faf`].
pub const DYNAMICS_MAX_QUBITS: usize = 16;
pub const GROUND_RESIDUAL_TOL: f64 = 1e-8;
/// Energy denominators below this are dropped from the perturbative oracle.
pub const PERTURBATIVE_GAP_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Tfim,
    /// `+λ X_ℓ X_{ℓ+2}` at `ℓ = N/2` unless `site` is given.
    Impurity {
        lambda: f64,
        #[serde(default)]
        site: Option<usize>,
    },
    /// `+λ Σ X_m X_{m+2}`; periodic chains add `X_{N−1} X_1` and `X_N X_2`.
    Annni { lambda: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParitySector {
    #[default]
    Even,
    Odd,
}

/// Model, size, field and boundary of a spin chain `−h_z ΣZ − ΣXX + interaction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: Model,
    pub n: usize,
    pub h_z: f64,
    pub bc: Boundary,
    #[serde(default)]
    pub sector: ParitySector,
}

impl ModelSpec {
    pub fn new(model: Model, n: usize, h_z: f64, bc: Boundary) -> Self {
        Self { model, n, h_z, bc, sector: ParitySector::Even }
    }

    pub fn tfim(n: usize, h_z: f64, bc: Boundary) -> Self {
        Self::new(Model::Tfim, n, h_z, bc)
    }

    pub fn impurity(n: usize, h_z: f64, lambda: f64, bc: Boundary) -> Self {
        Self::new(Model::Impurity { lambda, site: None }, n, h_z, bc)
    }

    pub fn annni(n: usize, h_z: f64, lambda: f64, bc: Boundary) -> Self {
        Self::new(Model::Annni { lambda }, n, h_z, bc)
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_h_z(mut self, h_z: f64) -> Self {
        self.h_z = h_z;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        match &mut self.model {
            Model::Tfim => {}
            Model::Impurity { lambda: l, .. } | Model::Annni { lambda: l } => *l = lambda,
        }
        self
    }

    pub fn lambda(&self) -> f64 {
        match self.model {
            Model::Tfim => 0.0,
            Model::Impurity { lambda, .. } | Model::Annni { lambda } => lambda,
        }
    }
}

type Terms = Vec<(f64, PauliOperator)>;

fn xx(n: usize, a: usize, b: usize) -> PauliOperator {
    PauliOperator::from_sites(n, &[(a, Pauli::X), (b, Pauli::X)]).expect("sites in range")
}

/// Quadratic terms and the interaction terms per unit `λ`.
pub fn model_terms(spec: &ModelSpec) -> Result<(Terms, Terms)> {
    let n = spec.n;
    let periodic = spec.bc == Boundary::Periodic;
    if n < 2 || (periodic && n < 3) {
        return Err(Error::InvalidArgument(format!("chain too short: N={n}")));
    }
    let mut free = Vec::new();
    for m in 1..=n {
        free.push((-spec.h_z, PauliOperator::from_sites(n, &[(m, Pauli::Z)])?));
    }
    for m in 1..n {
        free.push((-1.0, xx(n, m, m + 1)));
    }
    if periodic {
        free.push((-1.0, xx(n, n, 1)));
    }
    let mut inter = Vec::new();
    match spec.model {
        Model::Tfim => {}
        Model::Impurity { site, .. } => {
            let l = site.unwrap_or(n / 2);
            if n < 4 || l == 0 || l + 2 > n {
                return Err(Error::InvalidArgument(format!("impurity site {l} invalid for N={n}")));
            }
            inter.push((1.0, xx(n, l, l + 2)));
        }
        Model::Annni { .. } => {
            if n < 3 || (periodic && n < 4) {
                return Err(Error::InvalidArgument(format!("ANNNI chain too short: N={n}")));
            }
            for m in 1..=n - 2 {
                inter.push((1.0, xx(n, m, m + 2)));
            }
            if periodic {
                inter.push((1.0, xx(n, n - 1, 1)));
                inter.push((1.0, xx(n, n, 2)));
            }
        }
    }
    Ok((free, inter))
}

/// Full-basis index of sector state `i`.
#[inline]
pub fn sector_state(i: usize, parity: u32) -> usize {
    (i << 1) | (((i.count_ones() + parity) & 1) as usize)
}

/// Even-sector dimension `2^{N−1}`.
pub fn sector_dim(n: usize) -> usize {
    1 << (n - 1)
}

/// Sparse real Hamiltonian restricted to the even-parity sector.
#[derive(Clone, Debug)]
pub struct SpinHamiltonian {
    spec: Option<ModelSpec>,
    n: usize,
    terms: Terms,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SpinHamiltonian {
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        if spec.sector == ParitySector::Odd {
            return Err(Error::Unsupported("only the even parity sector is implemented".into()));
        }
        let (free, inter) = model_terms(spec)?;
        let lambda = spec.lambda();
        let mut terms = free;
        if lambda != 0.0 {
            terms.extend(inter.into_iter().map(|(c, p)| (c * lambda, p)));
        }
        let mut h = Self::from_terms(spec.n, terms)?;
        h.spec = Some(*spec);
        Ok(h)
    }

    /// Sum of parity-preserving Pauli terms with real matrix elements.
    pub fn from_terms(n: usize, terms: Terms) -> Result<Self> {
        if !(2..=31).contains(&n) {
            return Err(Error::InvalidArgument(format!("N={n} outside 2..=31")));
        }
        let dim = sector_dim(n);
        if dim > MAX_SECTOR_DIM {
            return Err(Error::Budget(format!("sector dimension {dim} exceeds {MAX_SECTOR_DIM}")));
        }
        let mut diag_terms = Vec::new();
        let mut off_terms: Vec<(u64, u64, f64)> = Vec::new();
        for (c, p) in &terms {
            if p.n_qubits() != n {
                return Err(Error::DimensionMismatch { expected: n, found: p.n_qubits() });
            }
            if !p.is_hermitian() {
                return Err(Error::InvalidArgument(format!("term {p} is not Hermitian")));
            }
            if p.phase_power() % 2 == 1 {
                return Err(Error::Unsupported(format!("term {p} has imaginary matrix elements")));
            }
            let (xm, zm) = p.basis_masks();
            if xm.count_ones() % 2 == 1 {
                return Err(Error::InvalidArgument(format!("term {p} does not commute with the parity")));
            }
            let c = if p.phase_power() == 2 { -c } else { *c };
            if xm == 0 {
                diag_terms.push((zm, c));
            } else {
                off_terms.push((xm, zm, c));
            }
        }
        let mut diag = vec![0.0; dim];
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let mut row: Vec<(u32, f64)> = Vec::new();
        for (i, d) in diag.iter_mut().enumerate() {
            let b = sector_state(i, 0) as u64;
            *d = diag_terms.iter().map(|&(zm, c)| if (b & zm).count_ones() % 2 == 0 { c } else { -c }).sum();
            row.clear();
            for &(xm, zm, c) in &off_terms {
                let v = if (b & zm).count_ones() % 2 == 0 { c } else { -c };
                row.push((((b ^ xm) >> 1) as u32, v));
            }
            row.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == col {
                    v += row[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    cols.push(col);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { spec: None, n, terms, diag, row_ptr, cols, vals })
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    pub fn terms(&self) -> &[(f64, PauliOperator)] {
        &self.terms
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().with_min_len(1024).for_each(|(i, yi)| {
            let mut acc = self.diag[i] * x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = acc;
        });
    }

    pub fn matvec_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.par_iter_mut().enumerate().with_min_len(1024).for_each(|(i, yi)| {
            let mut acc = x[i] * self.diag[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += x[self.cols[k] as usize] * self.vals[k];
            }
            *yi = acc;
        });
    }

    /// `⟨ψ|H|ψ⟩` for a sector vector.
    pub fn energy(&self, psi: &[Complex64]) -> f64 {
        let mut y = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.matvec_complex(psi, &mut y);
        psi.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Dense sector matrix; limited to [`DENSE_MAX_QUBITS`].
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.n > DENSE_MAX_QUBITS {
            return Err(Error::SizeCap { n: self.n, cap: DENSE_MAX_QUBITS });
        }
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = self.diag[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k] as usize)] += self.vals[k];
            }
        }
        Ok(m)
    }
}

/// Embed a sector vector into the full `2^N` space.
pub fn embed(n: usize, psi: &[Complex64]) -> Result<StateVector> {
    if psi.len() != sector_dim(n) {
        return Err(Error::DimensionMismatch { expected: sector_dim(n), found: psi.len() });
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    for (i, a) in psi.iter().enumerate() {
        amps[sector_state(i, 0)] = *a;
    }
    StateVector::from_amplitudes(n, amps)
}

pub fn embed_real(n: usize, psi: &[f64]) -> Result<StateVector> {
    embed(n, &psi.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>())
}

/// Covariance matrix of an even-sector vector, without leaving the sector.
pub fn sector_covariance(n: usize, psi: &[Complex64]) -> Result<CovarianceMatrix> {
    if psi.len() != sector_dim(n) {
        return Err(Error::DimensionMismatch { expected: sector_dim(n), found: psi.len() });
    }
    let modes = 2 * n;
    let pairs: Vec<(usize, usize)> = (1..=modes).flat_map(|a| (a + 1..=modes).map(move |b| (a, b))).collect();
    let vals: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let s = MajoranaIndexSet::new(modes, vec![a, b]).expect("valid pair");
            let p = majorana_string(&s, n).expect("matching size");
            let (xm, zm) = p.basis_masks();
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, amp) in psi.iter().enumerate() {
                let bs = sector_state(i, 0) as u64;
                let t = psi[((bs ^ xm) >> 1) as usize].conj() * amp;
                if (bs & zm).count_ones() % 2 == 0 {
                    acc += t;
                } else {
                    acc -= t;
                }
            }
            // −i · i^p · acc
            (Complex64::new(0.0, -1.0) * crate::algebra::i_pow(p.phase_power()) * acc).re
        })
        .collect();
    let mut m = DMatrix::zeros(modes, modes);
    for (&(a, b), v) in pairs.iter().zip(vals) {
        m[(a - 1, b - 1)] = v;
        m[(b - 1, a - 1)] = -v;
    }
    CovarianceMatrix::new(m)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Lowest eigenpair of the even sector.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

impl GroundState {
    pub fn state(&self, n: usize) -> Result<StateVector> {
        embed_real(n, &self.vector)
    }

    pub fn complex_vector(&self) -> Vec<Complex64> {
        self.vector.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }
}

fn residual(h: &SpinHamiltonian, e: f64, x: &[f64]) -> f64 {
    let mut y = vec![0.0; x.len()];
    h.matvec(x, &mut y);
    axpy(-e, x, &mut y);
    norm(&y)
}

struct LanczosRun {
    ritz_values: Vec<f64>,
    vector: Vec<f64>,
}

// One Lanczos pass with full reorthogonalization; the Ritz vector returned is the lowest one.
fn lanczos_pass(h: &SpinHamiltonian, v0: &[f64], krylov: usize, tol: f64) -> LanczosRun {
    let dim = h.dim();
    let mut basis: Vec<Vec<f64>> = vec![v0.iter().map(|x| x / norm(v0)).collect()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let scale = h.diag.iter().fold(1.0f64, |m, d| m.max(d.abs()));
    let mut j = 0;
    loop {
        h.matvec(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        axpy(-a, &basis[j], &mut w);
        if j > 0 {
            axpy(-beta[j - 1], &basis[j - 1], &mut w);
        }
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        alpha.push(a);
        let b = norm(&w);
        let last = j + 1 >= krylov || j + 1 >= dim || b < 1e-12 * scale;
        if last || j % 8 == 7 {
            let k = alpha.len();
            let t = DMatrix::from_fn(k, k, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let imin = eig.eigenvalues.imin();
            let est = b * eig.eigenvectors[(k - 1, imin)].abs();
            if last || est < tol {
                let mut x = vec![0.0; dim];
                for (i, q) in basis.iter().enumerate() {
                    axpy(eig.eigenvectors[(i, imin)], q, &mut x);
                }
                let nx = norm(&x);
                x.iter_mut().for_each(|v| *v /= nx);
                let mut ritz: Vec<f64> = eig.eigenvalues.iter().copied().collect();
                ritz.sort_by(f64::total_cmp);
                return LanczosRun { ritz_values: ritz, vector: x };
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
        j += 1;
    }
}

fn start_vector(dim: usize) -> Vec<f64> {
    let mut rng = stream_rng(0x1a2c, 0);
    (0..dim).map(|_| rng.random::<f64>() - 0.5).collect()
}

/// Ground state of the sector by restarted Lanczos (dense diagonalization for small sectors).
pub fn ground_state(h: &SpinHamiltonian) -> Result<GroundState> {
    let dim = h.dim();
    if dim <= 256 {
        let eig = SymmetricEigen::new(h.to_dense()?);
        let i = eig.eigenvalues.imin();
        let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let e = eig.eigenvalues[i];
        let r = residual(h, e, &v);
        return Ok(GroundState { energy: e, vector: v, residual: r });
    }
    let mut v = start_vector(dim);
    let mut best = f64::INFINITY;
    for _ in 0..40 {
        let run = lanczos_pass(h, &v, 160.min(dim), 1e-11);
        let e = dot(&run.vector, &{
            let mut y = vec![0.0; dim];
            h.matvec(&run.vector, &mut y);
            y
        });
        let r = residual(h, e, &run.vector);
        best = best.min(r);
        if r < 0.1 * GROUND_RESIDUAL_TOL {
            return Ok(GroundState { energy: e, vector: run.vector, residual: r });
        }
        v = run.vector;
    }
    Err(Error::Convergence(format!("Lanczos residual {best:e} after 40 restarts")))
}

/// Spectral interval from extremal Lanczos Ritz values, widened by 1% of the width.
pub fn spectral_bounds(h: &SpinHamiltonian) -> Result<(f64, f64)> {
    let (lo, hi) = if h.dim() <= 256 {
        let eig = SymmetricEigen::new(h.to_dense()?);
        (eig.eigenvalues.min(), eig.eigenvalues.max())
    } else {
        let run = lanczos_pass(h, &start_vector(h.dim()), 120.min(h.dim()), 0.0);
        (run.ritz_values[0], *run.ritz_values.last().expect("nonempty"))
    };
    let pad = 0.01 * (hi - lo).max(1e-3);
    Ok((lo - pad, hi + pad))
}

/// Eigenpairs of the sector, energies ascending.
pub fn dense_spectrum(h: &SpinHamiltonian) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dense = h.to_dense()?;
    let eig = SymmetricEigen::new(dense.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::from_fn(h.dim(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    repair_eigenvectors(&dense, &energies, &mut vecs)?;
    Ok((energies, vecs))
}

/// Columns whose residual exceeds [`GROUND_RESIDUAL_TOL`] are recomputed by shifted inverse iteration.
fn repair_eigenvectors(dense: &DMatrix<f64>, energies: &[f64], vecs: &mut DMatrix<f64>) -> Result<()> {
    let scale = energies.iter().fold(1.0f64, |a, e| a.max(e.abs()));
    let residual = |v: &DMatrix<f64>, c: usize| (dense * v.column(c) - v.column(c) * energies[c]).norm();
    let bad: Vec<usize> = (0..energies.len()).filter(|&c| residual(vecs, c) > GROUND_RESIDUAL_TOL * scale).collect();
    for (i, &c) in bad.iter().enumerate() {
        let shift = energies[c] + 1e-10 * scale;
        let lu = (dense - DMatrix::identity(dense.nrows(), dense.ncols()) * shift).lu();
        let mut x = DMatrix::from_fn(dense.nrows(), 1, |r, _| 1.0 + 0.37 * ((r * 7 + i * 13) % 11) as f64);
        for _ in 0..4 {
            x = lu.solve(&x).ok_or_else(|| Error::Convergence("singular shifted matrix".into()))?;
            // Stay orthogonal to already-settled vectors of the same eigenvalue.
            for d in 0..energies.len() {
                if d != c && (energies[d] - energies[c]).abs() < 1e-8 * scale && !bad[i..].contains(&d) {
                    let p = vecs.column(d).dot(&x.column(0));
                    x.column_mut(0).axpy(-p, &vecs.column(d), 1.0);
                }
            }
            let norm = x.norm();
            x /= norm;
        }
        vecs.set_column(c, &x.column(0));
        let r = residual(vecs, c);
        if r > GROUND_RESIDUAL_TOL * scale {
            return Err(Error::Convergence(format!("eigenvector {c} residual {r:.2e} after refinement")));
        }
    }
    Ok(())
}

/// One eigenstate of a spectrum scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub energy: f64,
    /// `ℱ_k` for the requested `k` list.
    pub faf: Vec<f64>,
    /// Half-chain entanglement entropy in bits.
    pub entropy: f64,
    pub parity: f64,
}

/// Every eigenstate with its FAF values and half-chain entropy.
pub fn full_spectrum_scan(h: &SpinHamiltonian, ks: &[u32]) -> Result<Vec<EigenRecord>> {
    let n = h.n_qubits();
    let (energies, vecs) = dense_spectrum(h)?;
    (0..energies.len())
        .into_par_iter()
        .map(|c| {
            let v: Vec<Complex64> = vecs.column(c).iter().map(|&x| Complex64::new(x, 0.0)).collect();
            let m = sector_covariance(n, &v)?;
            let faf = ks.iter().map(|&k| faf(&m, k)).collect::<Result<Vec<_>>>()?;
            let full = embed(n, &v)?;
            let entropy = entanglement_entropy(&full, n / 2)?;
            Ok(EigenRecord { energy: energies[c], faf, entropy, parity: 1.0 })
        })
        .collect()
}

/// Mean of `faf[k_index]` over `min(1000, 2^N/20)` eigenstates with energies closest to 0.
pub fn mid_spectrum_mean(records: &[EigenRecord], n: usize, k_index: usize) -> f64 {
    let count = 1000.min((1usize << n) / 20).max(1).min(records.len());
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.sort_by(|&a, &b| records[a].energy.abs().total_cmp(&records[b].energy.abs()));
    idx[..count].iter().map(|&i| records[i].faf[k_index]).sum::<f64>() / count as f64
}

/// `ℱ_k` of the ground state.
pub fn ground_state_faf(spec: &ModelSpec, ks: &[u32]) -> Result<Vec<f64>> {
    let h = SpinHamiltonian::build(spec)?;
    let gs = ground_state(&h)?;
    let m = sector_covariance(spec.n, &gs.complex_vector())?;
    ks.iter().map(|&k| faf(&m, k)).collect()
}

// Σ_m X_m applied to a sector vector of the given parity; output has the other parity.
fn apply_sum_x(n: usize, src: &[f64], parity: u32) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let b = sector_state(i, parity ^ 1);
        for q in 0..n {
            *o += src[(b ^ (1 << q)) >> 1];
        }
    }
    out
}

/// `1 − ⟨M⁴⟩ / 3⟨M²⟩²` with `M = Σ X_m`, for a real even-sector vector.
pub fn binder_sector(n: usize, psi: &[f64]) -> f64 {
    let m1 = apply_sum_x(n, psi, 0);
    let m2 = apply_sum_x(n, &m1, 1);
    let s2 = dot(&m1, &m1);
    1.0 - dot(&m2, &m2) / (3.0 * s2 * s2)
}

/// Binder cumulant `1 − ⟨M⁴⟩ / 3⟨M²⟩²` of any state, `M = Σ_m X_m`.
pub fn binder_cumulant(psi: &StateVector) -> f64 {
    let n = psi.n_qubits();
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        (0..v.len()).map(|b| (0..n).map(|q| v[b ^ (1 << q)]).sum()).collect()
    };
    let m1 = apply(psi.amplitudes());
    let m2 = apply(&m1);
    let s2: f64 = m1.iter().map(|a| a.norm_sqr()).sum();
    let s4: f64 = m2.iter().map(|a| a.norm_sqr()).sum();
    1.0 - s4 / (3.0 * s2 * s2)
}

/// Ground-state Binder cumulant at field `h_z`.
pub fn ground_state_binder(spec: &ModelSpec) -> Result<f64> {
    let gs = ground_state(&SpinHamiltonian::build(spec)?)?;
    Ok(binder_sector(spec.n, &gs.vector))
}

/// Field where the Binder curves of sizes `n1` and `n2` cross, by bisection on `[h_lo, h_hi]`.
pub fn binder_crossing(spec: &ModelSpec, n1: usize, n2: usize, h_lo: f64, h_hi: f64, tol: f64) -> Result<f64> {
    let diff = |h: f64| -> Result<f64> {
        Ok(ground_state_binder(&spec.with_n(n1).with_h_z(h))? - ground_state_binder(&spec.with_n(n2).with_h_z(h))?)
    };
    let (mut a, mut b) = (h_lo, h_hi);
    let (mut fa, fb) = (diff(a)?, diff(b)?);
    if fa * fb > 0.0 {
        return Err(Error::Convergence(format!("Binder curves N={n1},{n2} do not cross in [{h_lo}, {h_hi}]")));
    }
    while b - a > tol {
        let c = 0.5 * (a + b);
        let fc = diff(c)?;
        if fa * fc <= 0.0 {
            b = c;
        } else {
            a = c;
            fa = fc;
        }
    }
    Ok(0.5 * (a + b))
}

/// Infinite-size crossing from pair crossings `(N1, N2, h)` assuming `h = h_c + a N̄^{−2}`, `N̄ = (N1+N2)/2`.
pub fn extrapolate_crossings(crossings: &[(usize, usize, f64)]) -> Result<LinearFit> {
    let xs: Vec<f64> = crossings.iter().map(|&(a, b, _)| ((a + b) as f64 / 2.0).powi(-2)).collect();
    let ys: Vec<f64> = crossings.iter().map(|c| c.2).collect();
    linear_fit(&xs, &ys, None)
}

/// `(D_k, f_k)` from ground states at two nearby sizes, `ℱ_k = D_k N + f_k`.
pub fn dk_fk_extract(spec: &ModelSpec, k: u32, n1: usize, n2: usize) -> Result<(f64, f64)> {
    if n1 == n2 {
        return Err(Error::InvalidArgument("sizes must differ".into()));
    }
    let (n1, n2) = (n1.min(n2), n1.max(n2));
    if 8 * (n2 - n1) > n1 {
        return Err(Error::InvalidArgument(format!("size step {} exceeds N1/8 for N1={n1}", n2 - n1)));
    }
    let f1 = ground_state_faf(&spec.with_n(n1), &[k])?[0];
    let f2 = ground_state_faf(&spec.with_n(n2), &[k])?[0];
    let d = (f2 - f1) / (n2 - n1) as f64;
    Ok((d, f1 - d * n1 as f64))
}

/// Central difference `dℱ_k/dh_z` over ground states.
pub fn faf_derivative(spec: &ModelSpec, k: u32, dh: f64) -> Result<f64> {
    if dh <= 0.0 {
        return Err(Error::InvalidArgument("field step must be positive".into()));
    }
    let up = ground_state_faf(&spec.with_h_z(spec.h_z + dh), &[k])?[0];
    let down = ground_state_faf(&spec.with_h_z(spec.h_z - dh), &[k])?[0];
    Ok((up - down) / (2.0 * dh))
}

/// Second-order perturbative ground state together with the number of dropped denominators.
#[derive(Clone, Debug)]
pub struct PerturbativeState {
    pub vector: Vec<f64>,
    pub excluded: usize,
}

/// `|φ_0⟩ + λ Σ δ¹_n |φ_n⟩ + λ² Σ δ²_n |φ_n⟩` (normalized) from eigenstates of the `λ = 0` chain.
pub fn perturbative_ground_state(spec: &ModelSpec, order: u32) -> Result<PerturbativeState> {
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidArgument(format!("perturbative order {order} not in 1..=2")));
    }
    let lambda = spec.lambda();
    let h0 = SpinHamiltonian::build(&spec.with_lambda(0.0))?;
    let (_, inter) = model_terms(spec)?;
    let v = SpinHamiltonian::from_terms(spec.n, inter)?;
    let (e, u) = dense_spectrum(&h0)?;
    if e.len() > 1 && e[1] - e[0] < PERTURBATIVE_GAP_EPS {
        return Err(Error::Unsupported("degenerate unperturbed ground state".into()));
    }
    let dim = e.len();
    let apply_v = |x: &nalgebra::DVector<f64>| -> nalgebra::DVector<f64> {
        let mut y = vec![0.0; dim];
        v.matvec(x.as_slice(), &mut y);
        nalgebra::DVector::from_vec(y)
    };
    let phi0 = u.column(0).clone_owned();
    let vn0 = u.transpose() * apply_v(&phi0);
    let mut excluded = 0;
    let mut c1 = nalgebra::DVector::zeros(dim);
    for n in 1..dim {
        let gap = e[0] - e[n];
        if gap.abs() < PERTURBATIVE_GAP_EPS {
            excluded += 1;
        } else {
            c1[n] = vn0[n] / gap;
        }
    }
    let mut coeff = c1.clone() * lambda;
    coeff[0] = 1.0;
    if order == 2 {
        let w = u.transpose() * apply_v(&(&u * &c1));
        let mut c2 = nalgebra::DVector::zeros(dim);
        for n in 1..dim {
            let gap = e[0] - e[n];
            if gap.abs() >= PERTURBATIVE_GAP_EPS {
                c2[n] = (w[n] - vn0[0] * c1[n]) / gap;
            }
        }
        c2[0] = -0.5 * c1.norm_squared();
        coeff += c2 * (lambda * lambda);
    }
    let mut psi = &u * coeff;
    psi /= psi.norm();
    Ok(PerturbativeState { vector: psi.iter().copied().collect(), excluded })
}

/// `J_k(x)` for `k = 0..=k_max` by Miller's backward recurrence.
pub fn bessel_j_sequence(x: f64, k_max: usize) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; k_max + 1];
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let start = (k_max as f64).max(ax) + 40.0 + 12.0 * ax.cbrt();
    let start = start.ceil() as usize + (start.ceil() as usize & 1);
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / ax * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in &mut j[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    j.truncate(k_max + 1);
    j.resize(k_max + 1, 0.0);
    for (k, v) in j.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    j
}

/// `e^{−iHt}` on even-sector vectors through a Chebyshev expansion.
pub struct ChebyshevPropagator<'a> {
    h: &'a SpinHamiltonian,
    center: f64,
    half_width: f64,
}

impl<'a> ChebyshevPropagator<'a> {
    pub fn new(h: &'a SpinHamiltonian) -> Result<Self> {
        let (lo, hi) = spectral_bounds(h)?;
        Ok(Self { h, center: 0.5 * (lo + hi), half_width: 0.5 * (hi - lo) })
    }

    pub fn evolve(&self, psi: &[Complex64], t: f64, tol: f64) -> Result<Vec<Complex64>> {
        if psi.len() != self.h.dim() {
            return Err(Error::DimensionMismatch { expected: self.h.dim(), found: psi.len() });
        }
        if t == 0.0 {
            return Ok(psi.to_vec());
        }
        let x = self.half_width * t;
        let k_guess = (x.abs() * 1.2 + 40.0 + 12.0 * x.abs().cbrt()) as usize;
        let bessel = bessel_j_sequence(x, k_guess);
        let cut = tol.max(1e-300) * 1e-3;
        let order = bessel
            .iter()
            .enumerate()
            .rev()
            .find(|(k, v)| *k as f64 <= x.abs() || v.abs() > cut)
            .map_or(0, |(k, _)| k + 1);
        if order + 1 >= bessel.len() {
            return Err(Error::Convergence(format!("Chebyshev order exceeds {} for t={t}", bessel.len())));
        }
        let dim = psi.len();
        let (c, a) = (self.center, self.half_width);
        let apply = |src: &[Complex64], dst: &mut [Complex64]| {
            self.h.matvec_complex(src, dst);
            for (d, s) in dst.iter_mut().zip(src) {
                *d = (*d - s * c) / a;
            }
        };
        let mut prev = psi.to_vec();
        let mut cur = vec![Complex64::new(0.0, 0.0); dim];
        apply(&prev, &mut cur);
        let mut acc: Vec<Complex64> = prev.iter().map(|v| v * bessel[0]).collect();
        let mut phase = Complex64::new(0.0, -1.0);
        for (o, v) in acc.iter_mut().zip(&cur) {
            *o += v * phase * (2.0 * bessel[1]);
        }
        let mut next = vec![Complex64::new(0.0, 0.0); dim];
        for bk in bessel.iter().take(order + 1).skip(2) {
            apply(&cur, &mut next);
            for (nx, pv) in next.iter_mut().zip(&prev) {
                *nx = *nx * 2.0 - pv;
            }
            phase *= Complex64::new(0.0, -1.0);
            let coef = phase * (2.0 * bk);
            for (o, v) in acc.iter_mut().zip(&next) {
                *o += v * coef;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        let rot = Complex64::from_polar(1.0, -c * t);
        acc.iter_mut().for_each(|v| *v *= rot);
        let n0: f64 = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let n1: f64 = acc.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if (n1 - n0).abs() > tol.max(1e-9) * n0.max(1.0) {
            return Err(Error::Convergence(format!("Chebyshev norm drift {:e}", (n1 - n0).abs())));
        }
        Ok(acc)
    }
}

/// `e^{−iHt} ψ` for an even-sector vector.
pub fn chebyshev_evolve(h: &SpinHamiltonian, psi: &[Complex64], t: f64, tol: f64) -> Result<Vec<Complex64>> {
    ChebyshevPropagator::new(h)?.evolve(psi, t, tol)
}

/// FAF time series after a quench from a computational basis state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSeries {
    pub n: usize,
    pub ks: Vec<u32>,
    pub times: Vec<f64>,
    /// `faf[i][j]` is `ℱ_{ks[i]}` at `times[j]`.
    pub faf: Vec<Vec<f64>>,
    /// Late-window mean per `k`.
    pub f_infinity: Vec<f64>,
    /// Late-window standard deviation per `k`.
    pub late_std: Vec<f64>,
    /// Full-basis index of the initial state (`None` for averaged series).
    pub initial_state: Option<usize>,
    pub energy_drift: f64,
}

/// Quench sampling grid: uniform steps up to `linear_until`, then geometric steps up to `t_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeGrid {
    pub step: f64,
    pub linear_until: f64,
    pub factor: f64,
    pub t_max: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { step: 0.25, linear_until: 10.0, factor: 1.08, t_max: 2000.0 }
    }
}

impl TimeGrid {
    pub fn times(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.factor > 1.0 && self.linear_until >= 0.0 && self.t_max >= self.linear_until) {
            return Err(Error::InvalidArgument(format!("invalid time grid {self:?}")));
        }
        let steps = (self.linear_until / self.step).floor() as usize;
        let mut out: Vec<f64> = (0..=steps).map(|i| i as f64 * self.step).collect();
        let mut t = *out.last().expect("nonempty");
        loop {
            t = (t * self.factor).max(t + self.step);
            if t > self.t_max * (1.0 + 1e-12) {
                break;
            }
            out.push(t);
        }
        Ok(out)
    }
}

/// Random even-parity computational basis state (full-basis index) for sample `stream`.
pub fn random_initial_state(n: usize, seed: u64, stream: u64) -> usize {
    let mut rng = stream_rng(seed, stream);
    sector_state(rng.random_range(0..sector_dim(n)), 0)
}

/// Evolve the computational basis state `initial` and record `ℱ_k` on `times`.
pub fn dynamics_faf(
    spec: &ModelSpec,
    ks: &[u32],
    times: &[f64],
    late_window: (f64, f64),
    initial: usize,
    tol: f64,
) -> Result<DynamicsSeries> {
    if spec.n > DYNAMICS_MAX_QUBITS {
        return Err(Error::Budget(format!("dynamics limited to N ≤ {DYNAMICS_MAX_QUBITS}")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("time grid must be non-negative and sorted".into()));
    }
    let h = SpinHamiltonian::build(spec)?;
    let prop = ChebyshevPropagator::new(&h)?;
    let dim = h.dim();
    if initial >= 1 << spec.n || initial.count_ones() % 2 == 1 {
        return Err(Error::InvalidArgument(format!("initial state {initial} is not an even-parity basis state")));
    }
    let start = initial >> 1;
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    psi[start] = Complex64::new(1.0, 0.0);
    let e0 = h.energy(&psi);
    let mut faf_t = vec![Vec::with_capacity(times.len()); ks.len()];
    let mut t_prev = 0.0;
    let mut drift: f64 = 0.0;
    for &t in times {
        psi = prop.evolve(&psi, t - t_prev, tol)?;
        t_prev = t;
        drift = drift.max((h.energy(&psi) - e0).abs());
        let m = sector_covariance(spec.n, &psi)?;
        for (series, &k) in faf_t.iter_mut().zip(ks) {
            series.push(faf(&m, k)?);
        }
    }
    let mut out = DynamicsSeries {
        n: spec.n,
        ks: ks.to_vec(),
        times: times.to_vec(),
        faf: faf_t,
        f_infinity: vec![],
        late_std: vec![],
        initial_state: Some(sector_state(start, 0)),
        energy_drift: drift,
    };
    out.set_late_window(late_window)?;
    Ok(out)
}

impl DynamicsSeries {
    /// Recompute `ℱ^∞_k` and its spread over `[lo, hi]`.
    pub fn set_late_window(&mut self, (lo, hi): (f64, f64)) -> Result<()> {
        let idx: Vec<usize> = (0..self.times.len()).filter(|&i| self.times[i] >= lo && self.times[i] <= hi).collect();
        if idx.is_empty() {
            return Err(Error::InvalidArgument(format!("no grid time in late window [{lo}, {hi}]")));
        }
        self.f_infinity.clear();
        self.late_std.clear();
        for series in &self.faf {
            let vals: Vec<f64> = idx.iter().map(|&i| series[i]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            self.f_infinity.push(mean);
            self.late_std.push(var.sqrt());
        }
        Ok(())
    }

    /// Pointwise average of series sharing size, `k` list and grid.
    pub fn average(runs: &[DynamicsSeries], late_window: (f64, f64)) -> Result<DynamicsSeries> {
        let first = runs.first().ok_or_else(|| Error::InvalidArgument("no series to average".into()))?;
        if runs.iter().any(|r| r.times != first.times || r.ks != first.ks || r.n != first.n) {
            return Err(Error::InvalidArgument("series do not share a grid".into()));
        }
        let faf = (0..first.ks.len())
            .map(|i| {
                (0..first.times.len())
                    .map(|j| runs.iter().map(|r| r.faf[i][j]).sum::<f64>() / runs.len() as f64)
                    .collect()
            })
            .collect();
        let mut out = DynamicsSeries {
            faf,
            initial_state: None,
            energy_drift: runs.iter().map(|r| r.energy_drift).fold(0.0, f64::max),
            ..first.clone()
        };
        out.set_late_window(late_window)?;
        Ok(out)
    }
}

/// Saturation time and power-law relaxation exponent of `Δℱ = ℱ^∞ − ℱ(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    /// `None` when the series never comes within `ε` (censored).
    pub t_sat: Option<f64>,
    pub gamma: Option<f64>,
    pub fit_points: usize,
    pub fit_correlation: Option<f64>,
}

/// `t_sat` from `Δℱ(t_sat) = ε`, and `γ` from a log-log fit of `Δℱ ∝ t^{−γ}`.
///
/// The fit uses points with `t` in `window` when given; otherwise points with
/// `Δℱ ∈ [max(0.05, 5σ_late), 0.15 ℱ^∞]` before the first crossing of the lower bound.
pub fn saturation_analysis(
    series: &DynamicsSeries,
    k_index: usize,
    eps: f64,
    window: Option<(f64, f64)>,
) -> Result<SaturationReport> {
    let f = series.faf.get(k_index).ok_or_else(|| Error::InvalidArgument(format!("no k index {k_index}")))?;
    let f_inf = series.f_infinity[k_index];
    let gaps: Vec<f64> = f.iter().map(|v| f_inf - v).collect();
    let t_sat = saturation_time(&series.times, &gaps, eps);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    match window {
        Some((lo, hi)) => {
            for (&t, &g) in series.times.iter().zip(&gaps) {
                if t >= lo && t <= hi && t > 0.0 && g > 0.0 {
                    xs.push(t.ln());
                    ys.push(g.ln());
                }
            }
        }
        None => {
            let floor = (5.0 * series.late_std[k_index]).max(0.05);
            let ceil = 0.15 * f_inf;
            for (&t, &g) in series.times.iter().zip(&gaps) {
                if g < floor {
                    break;
                }
                if t > 0.0 && g <= ceil {
                    xs.push(t.ln());
                    ys.push(g.ln());
                }
            }
        }
    }
    let fit = if xs.len() >= 4 { Some(linear_fit(&xs, &ys, None)?) } else { None };
    Ok(SaturationReport {
        t_sat,
        gamma: fit.map(|f| -f.slope),
        fit_points: xs.len(),
        fit_correlation: fit.map(|f| f.correlation),
    })
}

/// Linear fit of `ℱ_k(t)` over the early window where `ℱ_k ∈ [lo·ℱ^∞, hi·ℱ^∞]`.
pub fn early_growth_fit(series: &DynamicsSeries, k_index: usize, lo: f64, hi: f64) -> Result<LinearFit> {
    let f = &series.faf[k_index];
    let f_inf = series.f_infinity[k_index];
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&t, &v) in series.times.iter().zip(f) {
        if v > hi * f_inf {
            break;
        }
        if v >= lo * f_inf {
            xs.push(t);
            ys.push(v);
        }
    }
    linear_fit(&xs, &ys, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_values() {
        let j = bessel_j_sequence(1.0, 3);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-13);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-13);
        let big = bessel_j_sequence(50.0, 60);
        assert!((big[0] - 0.055_812_327_669_251_86).abs() < 1e-12);
    }

    #[test]
    fn term_counts() {
        let imp = ModelSpec::impurity(8, 1.0, 0.5, Boundary::Open);
        assert_eq!(model_terms(&imp).unwrap().1.len(), 1);
        let annni = ModelSpec::annni(8, 1.0, 0.5, Boundary::Periodic);
        assert_eq!(SpinHamiltonian::build(&annni).unwrap().terms().len(), 24);
        let odd = ModelSpec { sector: ParitySector::Odd, ..annni };
        assert!(matches!(SpinHamiltonian::build(&odd), Err(Error::Unsupported(_))));
    }

    #[test]
    fn sector_ranking() {
        for i in 0..64 {
            let b = sector_state(i, 0);
            assert_eq!(b.count_ones() % 2, 0);
            assert_eq!(b >> 1, i);
        }
    }

    #[test]
    fn strong_field_polarizes() {
        let spec = ModelSpec::tfim(6, 50.0, Boundary::Open);
        let gs = ground_state(&SpinHamiltonian::build(&spec).unwrap()).unwrap();
        assert!(gs.vector[0].abs() > 0.999);
    }

    #[test]
    fn binder_of_cat_state() {
        let n = 4;
        let mut amps = vec![Complex64::new(0.25, 0.0); 16];
        for (b, a) in amps.iter_mut().enumerate() {
            if (b as u32).count_ones() % 2 == 1 {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let psi = StateVector::from_amplitudes(n, amps).unwrap();
        assert!((binder_cumulant(&psi) - 2.0 / 3.0).abs() < 1e-12);
    }
}
