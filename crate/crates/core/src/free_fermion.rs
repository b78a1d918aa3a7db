//! Quadratic Majorana Hamiltonians, matchgate circuits as O(2N) matrices, the transverse-field
//! Ising chain and the Peschel–Emery line of the ANNNI chain.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::algebra::{majorana_string, MajoranaIndexSet, PauliOperator};
use crate::dense_state::StateVector;
use crate::error::{Error, Result};
use crate::nongauss::CovarianceMatrix;

/// `H_+ = (i/4) Σ H_mn γ_m γ_n` with `H` real antisymmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticHamiltonian {
    h: DMatrix<f64>,
}

impl QuadraticHamiltonian {
    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch { expected: h.nrows(), found: h.ncols() });
        }
        if h.nrows() % 2 != 0 {
            return Err(Error::OddDimension(h.nrows()));
        }
        let dev = (&h + h.transpose()).amax();
        if dev > 1e-12 {
            return Err(Error::NotAntisymmetric(dev));
        }
        Ok(Self { h })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn n_modes(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.h.nrows() / 2
    }

    /// Add `i a γ_m γ_n` (1-based, `m ≠ n`).
    pub fn add_bilinear(&mut self, m: usize, n: usize, a: f64) {
        self.h[(m - 1, n - 1)] += 2.0 * a;
        self.h[(n - 1, m - 1)] -= 2.0 * a;
    }

    /// Dense `2^N × 2^N` operator; for tests and small-N cross-checks.
    pub fn to_dense(&self) -> Result<DMatrix<num_complex::Complex64>> {
        let n = self.n_qubits();
        let d = 1usize << n;
        let mut out = DMatrix::zeros(d, d);
        for a in 1..=self.n_modes() {
            for b in (a + 1)..=self.n_modes() {
                let v = self.h[(a - 1, b - 1)];
                if v == 0.0 {
                    continue;
                }
                // (i/4)(H_ab γ_aγ_b + H_ba γ_bγ_a) = (i/2) H_ab γ_aγ_b
                let p = majorana_string(&MajoranaIndexSet::new(2 * n, vec![a, b])?, n)?;
                out += p.to_dense() * num_complex::Complex64::new(0.0, 0.5 * v);
            }
        }
        Ok(out)
    }
}

/// `H = Gᵀ (⊕ [[0, ε_m], [−ε_m, 0]]) G`.
#[derive(Clone, Debug)]
pub struct CanonicalForm {
    pub g: DMatrix<f64>,
    pub eps: Vec<f64>,
    /// Some `ε_m` lies below [`DEGENERATE_EPS`]; the ground state is not unique.
    pub degenerate: bool,
}

pub const DEGENERATE_EPS: f64 = 1e-10;

impl CanonicalForm {
    /// Ground-state energy `−Σ ε_m / 2`.
    pub fn ground_energy(&self) -> f64 {
        -0.5 * self.eps.iter().sum::<f64>()
    }
}

/// Canonical form through the eigenvectors of `HᵀH`, paired as `(u, Hᵀu/ε)`.
pub fn canonical_form(h: &QuadraticHamiltonian) -> Result<CanonicalForm> {
    let hm = &h.h;
    let n_modes = hm.nrows();
    let scale = hm.amax().max(1.0);
    let sym = hm.transpose() * hm;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n_modes).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n_modes);
    let mut eps = Vec::with_capacity(n_modes / 2);
    let mut cursor = 0;
    let next_fresh = |basis: &[DVector<f64>], cursor: &mut usize| -> Option<DVector<f64>> {
        while *cursor < n_modes {
            let v = eig.eigenvectors.column(order[*cursor]).into_owned();
            *cursor += 1;
            let v = orthogonalize(v, basis);
            let nv = v.norm();
            if nv > 0.5 {
                return Some(v / nv);
            }
        }
        None
    };
    while basis.len() < n_modes {
        let u = next_fresh(&basis, &mut cursor)
            .ok_or_else(|| Error::Convergence("canonical form: eigenbasis exhausted".into()))?;
        let hu = hm.transpose() * &u;
        let e = hu.norm();
        let mut w = if e > 1e-9 * scale {
            let mut probe = basis.clone();
            probe.push(u.clone());
            let w = orthogonalize(hu / e, &probe);
            let nw = w.norm();
            w / nw
        } else {
            let mut probe = basis.clone();
            probe.push(u.clone());
            let mut c = cursor;
            let w = next_fresh(&probe, &mut c)
                .ok_or_else(|| Error::Convergence("canonical form: no partner for zero mode".into()))?;
            w
        };
        let mut val = u.dot(&(hm * &w));
        if val < 0.0 {
            w = -w;
            val = -val;
        }
        basis.push(u);
        basis.push(w);
        eps.push(val);
    }
    // rows of G are the basis vectors; reorder pairs by descending ε
    let mut pairs: Vec<usize> = (0..eps.len()).collect();
    pairs.sort_by(|&a, &b| eps[b].total_cmp(&eps[a]));
    let mut g = DMatrix::zeros(n_modes, n_modes);
    let mut sorted_eps = Vec::with_capacity(eps.len());
    for (row, &p) in pairs.iter().enumerate() {
        g.set_row(2 * row, &basis[2 * p].transpose());
        g.set_row(2 * row + 1, &basis[2 * p + 1].transpose());
        sorted_eps.push(eps[p]);
    }
    let degenerate = sorted_eps.last().is_some_and(|&e| e < DEGENERATE_EPS);
    Ok(CanonicalForm { g, eps: sorted_eps, degenerate })
}

fn orthogonalize(mut v: DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
    }
    v
}

/// Block-diagonal `⊕ [[0, ε_m], [−ε_m, 0]]`.
pub fn canonical_blocks(eps: &[f64]) -> DMatrix<f64> {
    let n = eps.len();
    let mut b = DMatrix::zeros(2 * n, 2 * n);
    for (m, &e) in eps.iter().enumerate() {
        b[(2 * m, 2 * m + 1)] = e;
        b[(2 * m + 1, 2 * m)] = -e;
    }
    b
}

/// Ground-state covariance `Gᵀ M_0 G`; the flag reports a non-unique ground state.
pub fn ground_covariance(h: &QuadraticHamiltonian) -> Result<(CovarianceMatrix, bool)> {
    let cf = canonical_form(h)?;
    let m0 = CovarianceMatrix::vacuum(h.n_qubits());
    let m = cf.g.transpose() * m0.matrix() * &cf.g;
    let mut m = m;
    crate::nongauss::antisymmetrize(&mut m);
    Ok((CovarianceMatrix::new(m)?, cf.degenerate))
}

/// `V_mn(θ) = exp(θ γ_m γ_n / 2)`, `1 ≤ m < n ≤ 2N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneRotation {
    pub m: usize,
    pub n: usize,
    pub theta: f64,
}

impl PlaneRotation {
    pub fn new(m: usize, n: usize, theta: f64) -> Result<Self> {
        if m == 0 || m >= n {
            return Err(Error::InvalidArgument(format!("rotation axes must satisfy 1 ≤ m < n, got ({m},{n})")));
        }
        Ok(Self { m, n, theta })
    }
}

/// Generators of the Gaussian group used in circuits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatchGate {
    Rotation(PlaneRotation),
    /// `X_N`, acting as `γ_{2N} ↦ −γ_{2N}`.
    ReflectionLast,
}

/// `G = G_L ⋯ G_1` with `U†γ_aU = Σ_b G_ab γ_b` for `U = U_L ⋯ U_1`.
pub fn matchgate_to_orthogonal(n_qubits: usize, circuit: &[MatchGate]) -> Result<DMatrix<f64>> {
    let n_modes = 2 * n_qubits;
    let mut g = DMatrix::<f64>::identity(n_modes, n_modes);
    for gate in circuit {
        match *gate {
            MatchGate::Rotation(r) => {
                if r.n > n_modes {
                    return Err(Error::ModeOutOfRange { mode: r.n, n_modes });
                }
                let (c, s) = (r.theta.cos(), r.theta.sin());
                let (i, j) = (r.m - 1, r.n - 1);
                // left-multiply by the Givens matrix
                for col in 0..n_modes {
                    let a = g[(i, col)];
                    let b = g[(j, col)];
                    g[(i, col)] = c * a + s * b;
                    g[(j, col)] = -s * a + c * b;
                }
            }
            MatchGate::ReflectionLast => {
                for col in 0..n_modes {
                    g[(n_modes - 1, col)] = -g[(n_modes - 1, col)];
                }
            }
        }
    }
    Ok(g)
}

/// Pauli realization of a gate as `c·𝟙 + s·P`.
pub fn matchgate_pauli(n_qubits: usize, gate: &MatchGate) -> Result<(f64, f64, PauliOperator)> {
    match *gate {
        MatchGate::Rotation(r) => {
            let s = MajoranaIndexSet::new(2 * n_qubits, vec![r.m, r.n])?;
            Ok(((r.theta / 2.0).cos(), (r.theta / 2.0).sin(), majorana_string(&s, n_qubits)?))
        }
        MatchGate::ReflectionLast => Ok((
            0.0,
            1.0,
            PauliOperator::from_sites(n_qubits, &[(n_qubits, crate::algebra::Pauli::X)])?,
        )),
    }
}

/// Dense-state evolution `U_L ⋯ U_1 |ψ⟩`.
pub fn apply_matchgates(psi: &StateVector, circuit: &[MatchGate]) -> Result<StateVector> {
    let n = psi.n_qubits();
    let mut cur = psi.clone();
    for gate in circuit {
        let (c, s, p) = matchgate_pauli(n, gate)?;
        let moved = cur.apply_pauli(&p)?;
        let amps = cur
            .amplitudes()
            .iter()
            .zip(moved.amplitudes())
            .map(|(a, b)| a * c + b * s)
            .collect();
        cur = StateVector::from_amplitudes(n, amps)?;
    }
    Ok(cur)
}

/// Random rotations on arbitrary mode pairs, with reflections mixed in at rate ¼.
pub fn random_matchgate_circuit<R: Rng + ?Sized>(n_qubits: usize, n_gates: usize, rng: &mut R) -> Vec<MatchGate> {
    let n_modes = 2 * n_qubits;
    (0..n_gates)
        .map(|_| {
            if rng.random::<f64>() < 0.25 {
                MatchGate::ReflectionLast
            } else {
                let a = rng.random_range(1..=n_modes);
                let mut b = rng.random_range(1..n_modes);
                if b >= a {
                    b += 1;
                }
                let (m, n) = if a < b { (a, b) } else { (b, a) };
                MatchGate::Rotation(PlaneRotation { m, n, theta: rng.random_range(0.0..std::f64::consts::TAU) })
            }
        })
        .collect()
}

/// Boundary conditions of a spin chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Even-parity TFIM `−h_z ΣZ − ΣXX − g X_N X_1` (`J = 1`, `g = 1` for periodic).
///
/// Bonds contribute `i γ_{2m} γ_{2m+1}`; the periodic bond in the even sector is `+i γ_1 γ_{2N}`.
pub fn tfim_hamiltonian(n: usize, h_z: f64, bc: Boundary) -> Result<QuadraticHamiltonian> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("TFIM needs N ≥ 2, got {n}")));
    }
    let mut h = QuadraticHamiltonian { h: DMatrix::zeros(2 * n, 2 * n) };
    for m in 1..=n {
        h.add_bilinear(2 * m - 1, 2 * m, h_z);
    }
    for m in 1..n {
        h.add_bilinear(2 * m, 2 * m + 1, 1.0);
    }
    if bc == Boundary::Periodic {
        h.add_bilinear(1, 2 * n, 1.0);
    }
    Ok(h)
}

/// `|⟨γ_i γ_{i+2r}⟩|` at the critical periodic Ising chain: 0 for integer `r`,
/// `[N sin(πr/N)]^{-1}` for half-integer `r`.
pub fn ising_critical_correlator(n: usize, r: f64) -> Result<f64> {
    let twice = 2.0 * r;
    if !(r > 0.0 && r < n as f64) || (twice - twice.round()).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("r = {r} must be a positive (half-)integer below N = {n}")));
    }
    if (twice.round() as i64) % 2 == 0 {
        Ok(0.0)
    } else {
        Ok(1.0 / (n as f64 * (std::f64::consts::PI * r / n as f64).sin()))
    }
}

/// Peschel–Emery field `1/(4λ) − λ` and `cos θ = −1 / (2(h_z + λ))`.
pub fn pe_parameters(lambda: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && lambda < 0.5) {
        return Err(Error::InvalidArgument(format!("λ = {lambda} outside (0, 1/2)")));
    }
    let h = 0.25 / lambda - lambda;
    Ok((h, -0.5 / (h + lambda)))
}

/// Closed-form covariance of the Peschel–Emery product superposition.
///
/// `M_{2j−1,2j} = a_N(c + c^{N−1})`, `M_{2i−1,2j} = a_N s² c^{N−k−1}` and
/// `M_{2i,2j−1} = a_N s² c^{k−1}` for `k = j − i > 0`.
pub fn pe_covariance(n: usize, lambda: f64) -> Result<(f64, CovarianceMatrix)> {
    let (h, c) = pe_parameters(lambda)?;
    Ok((h, pe_covariance_cos(n, c)?))
}

pub fn pe_covariance_cos(n: usize, c: f64) -> Result<CovarianceMatrix> {
    if n < 2 {
        return Err(Error::InvalidArgument("N ≥ 2 required".into()));
    }
    let s2 = 1.0 - c * c;
    let a = 1.0 / (1.0 + c.powi(n as i32));
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    let mut put = |i: usize, j: usize, v: f64| {
        m[(i - 1, j - 1)] = v;
        m[(j - 1, i - 1)] = -v;
    };
    for i in 1..=n {
        put(2 * i - 1, 2 * i, a * (c + c.powi(n as i32 - 1)));
        for j in (i + 1)..=n {
            let k = (j - i) as i32;
            put(2 * i - 1, 2 * j, a * s2 * c.powi(n as i32 - k - 1));
            put(2 * i, 2 * j - 1, a * s2 * c.powi(k - 1));
        }
    }
    CovarianceMatrix::new(m)
}

/// Signed cyclic shift `S` with `M_ANNNI = S M_PE Sᵀ` for even `N`:
/// `S[m, m−1] = σ_m` (cyclic, 1-based), `σ_1 = −1`, `σ_m = (−1)^{⌊(m−1)/2⌋}`.
pub fn pe_duality(n: usize) -> Result<DMatrix<f64>> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::Unsupported(format!("the Gaussian map to the periodic ANNNI ground state needs even N, got {n}")));
    }
    let n_modes = 2 * n;
    let mut s = DMatrix::zeros(n_modes, n_modes);
    for m in 1..=n_modes {
        let sigma = if m == 1 {
            -1.0
        } else if ((m - 1) / 2) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        let src = if m == 1 { n_modes } else { m - 1 };
        s[(m - 1, src - 1)] = sigma;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_canonical() {
        let h = QuadraticHamiltonian::new(DMatrix::from_row_slice(2, 2, &[0.0, 2.5, -2.5, 0.0])).unwrap();
        let cf = canonical_form(&h).unwrap();
        assert!((cf.eps[0] - 2.5).abs() < 1e-12);
        assert!((&cf.g - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn givens_from_single_rotation() {
        let g = matchgate_to_orthogonal(1, &[MatchGate::Rotation(PlaneRotation::new(1, 2, 0.3).unwrap())]).unwrap();
        assert!((g[(0, 0)] - 0.3f64.cos()).abs() < 1e-15);
        assert!((g[(0, 1)] - 0.3f64.sin()).abs() < 1e-15);
        assert!((g[(1, 0)] + 0.3f64.sin()).abs() < 1e-15);
        assert_eq!(matchgate_to_orthogonal(3, &[]).unwrap(), DMatrix::identity(6, 6));
    }

    #[test]
    fn critical_correlator_values() {
        assert_eq!(ising_critical_correlator(8, 1.0).unwrap(), 0.0);
        let v = ising_critical_correlator(8, 0.5).unwrap();
        assert!((v - 0.6407).abs() < 1e-4);
        assert!(ising_critical_correlator(8, 0.3).is_err());
        assert!(ising_critical_correlator(8, 9.5).is_err());
    }

    #[test]
    fn pe_values() {
        let (h, c) = pe_parameters(0.3).unwrap();
        assert!((h - 0.533_333_333_333).abs() < 1e-9);
        assert!((c + 0.6).abs() < 1e-12);
        let m = pe_covariance_cos(4, -0.6).unwrap();
        assert!((m.matrix()[(0, 1)] + 0.7224).abs() < 1e-4);
        assert!(pe_parameters(0.6).is_err());
        assert!(pe_duality(5).is_err());
    }

    #[test]
    fn zero_hamiltonian_is_degenerate() {
        let h = QuadraticHamiltonian::new(DMatrix::zeros(4, 4)).unwrap();
        let cf = canonical_form(&h).unwrap();
        assert!(cf.degenerate);
        let gtg = cf.g.transpose() * &cf.g;
        assert!((gtg - DMatrix::identity(4, 4)).amax() < 1e-12);
    }
}
