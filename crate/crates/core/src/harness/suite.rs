//! Acceptance battery: ten criteria, each a list of named checks with measured and expected values.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::stream_rng;
use crate::algebra::PauliOperator;
use crate::commutant::{comm2_independent_count, invariance_check, phi_measure, ReplicaSpec};
use crate::dense_state::{apply_unitary, covariance_matrix, expectation, haar_state, prepare_named, NamedState, Sector, StateVector};
use crate::ed_lab::{
    binder_crossing, dynamics_faf, extrapolate_crossings, full_spectrum_scan, ground_state, ground_state_faf,
    mid_spectrum_mean, random_initial_state, saturation_analysis, early_growth_fit, sector_covariance, DynamicsSeries,
    ModelSpec, SpinHamiltonian, TimeGrid,
};
use crate::free_fermion::{apply_matchgates, pe_covariance, pe_duality, random_matchgate_circuit, Boundary};
use crate::nongauss::{
    catalan, faf, ks_critical, ks_statistic, nge_finite_q, nge_infinity, random_covariance, semicircle_cdf, typical_faf,
    williamson_eigenvalues, CovarianceMatrix,
};
use crate::stabilizer_mc::{
    brickwall_series, covariance_from_tableau, dense_circuit, faf1_gap, fit_decay, linear_fit, mc_faf1, pauli_expectation,
    rmps_faf1, saturation_time, CircuitBuilder, StabilizerTableau, Symmetry,
};
use crate::Result;

/// Sample budgets: `Fast` for smoke runs, `Full` at the stated sizes and tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

impl Level {
    fn pick<T>(self, fast: T, full: T) -> T {
        match self {
            Level::Fast => fast,
            Level::Full => full,
        }
    }
}

/// Criterion ids and titles.
pub const CRITERIA: [(u8, &str); 10] = [
    (1, "exact golden values"),
    (2, "Gaussian invariance and faithfulness"),
    (3, "typical states"),
    (4, "random-matrix model"),
    (5, "commutant"),
    (6, "stabilizer engine"),
    (7, "RMPS bond-dimension scaling"),
    (8, "equilibrium"),
    (9, "eigenstates and dynamics"),
    (10, "NGE consistency"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: String,
    pub expected: String,
    pub passed: bool,
    /// Documented reason when this check is expected to fail.
    pub known_failure: Option<&'static str>,
}

impl Check {
    fn new(name: &str, passed: bool, measured: impl Into<String>, expected: impl Into<String>) -> Self {
        Self { name: name.into(), measured: measured.into(), expected: expected.into(), passed, known_failure: None }
    }

    fn known(mut self, reason: &'static str) -> Self {
        self.known_failure = Some(reason);
        self
    }

    fn errored(name: &str, e: impl std::fmt::Display) -> Self {
        Self::new(name, false, format!("error: {e}"), "no error")
    }

    /// Failed and not covered by a documented reason.
    pub fn is_blocking(&self) -> bool {
        !self.passed && self.known_failure.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn blocking(&self) -> bool {
        self.checks.iter().any(Check::is_blocking)
    }

    /// `PASS`/`FAIL` line followed by indented per-check lines.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let ok = self.checks.iter().filter(|c| c.passed).count();
        let _ = writeln!(s, "{status} criterion {:>2}: {} ({ok}/{} checks, {:.1}s)", self.id, self.title, self.checks.len(), self.seconds);
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            let _ = write!(s, "    {mark} {}: {} (expected {})", c.name, c.measured, c.expected);
            if let (false, Some(reason)) = (c.passed, c.known_failure) {
                let _ = write!(s, "\n         known failure: {reason}");
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub level: Level,
    pub criteria: Vec<CriterionReport>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(CriterionReport::passed)
    }

    pub fn blocking_failures(&self) -> usize {
        self.criteria.iter().flat_map(|c| &c.checks).filter(|c| c.is_blocking()).count()
    }

    pub fn known_failures(&self) -> usize {
        self.criteria.iter().flat_map(|c| &c.checks).filter(|c| !c.passed && c.known_failure.is_some()).count()
    }

    pub fn render(&self) -> String {
        let mut s: String = self.criteria.iter().map(CriterionReport::render).collect();
        let passed = self.criteria.iter().filter(|c| c.passed()).count();
        let _ = writeln!(
            s,
            "{passed}/{} criteria passed; {} blocking and {} documented check failures",
            self.criteria.len(),
            self.blocking_failures(),
            self.known_failures()
        );
        s
    }
}

const NGE_LOG_BASE: &str = "NGE_inf is a base-2 Renyi entropy, so near lambda = 1 it expands to F1/(2 ln 2) ~ 0.72 F1; the F1/2 relation holds only with the natural log";
const NGE_HAAR: &str = "with the base-2 logarithm NGE_inf - F1 ~ (1/ln 2 - 1) sum lambda^2 ~ 0.08 for Haar states at N = 10; no single log base satisfies both NGE relations";
const QUARTIC_SINGLETONS: &str = "with singleton blocks the disjoint-tuple contraction is sum over distinct a,b,c,d of M_ab M_bc M_cd M_da, which changes under M -> R M R^T even for Gaussian M; only the unrestricted tr(M^4) is invariant";
const GAMMA_FINITE_SIZE: &str = "relaxation exponent of the impurity quench measures 2.4-2.5 at N = 12-16 and drifts down only slowly with N; the band is not reached at sizes reachable by exact evolution";

/// Run one criterion.
pub fn run_criterion(id: u8, level: Level) -> CriterionReport {
    let start = Instant::now();
    let checks = match id {
        1 => c1_goldens(),
        2 => c2_gaussian(level),
        3 => c3_typical(level),
        4 => c4_rmt(level),
        5 => c5_commutant(level),
        6 => c6_stabilizer(level),
        7 => c7_rmps(level),
        8 => c8_equilibrium(level),
        9 => c9_dynamics(level),
        10 => c10_nge(level),
        _ => vec![Check::new("criterion id", false, id.to_string(), "1..=10")],
    };
    let title = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    CriterionReport { id, title, checks, seconds: start.elapsed().as_secs_f64() }
}

/// Criteria built on exact reference values: closed-form goldens, the commutant counterexample and the equilibrium checks.
pub const PAPER_GOLDEN_CRITERIA: [u8; 3] = [1, 5, 8];

/// Run every criterion at `level`.
pub fn verify_suite(level: Level) -> SuiteReport {
    verify_selected(&CRITERIA.map(|c| c.0), level)
}

/// Run the listed criteria in order.
pub fn verify_selected(ids: &[u8], level: Level) -> SuiteReport {
    SuiteReport { level, criteria: ids.iter().map(|&id| run_criterion(id, level)).collect() }
}

fn guard(name: &str, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| Check::errored(name, e))
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

fn fafs(m: &CovarianceMatrix, ks: &[u32]) -> Result<Vec<f64>> {
    ks.iter().map(|&k| faf(m, k)).collect()
}

fn c1_goldens() -> Vec<Check> {
    let thetas = [0.0, PI / 4.0, PI / 2.0, PI];
    let psi = guard("|Psi_theta>", || {
        let mut worst: f64 = 0.0;
        for &th in &thetas {
            let m = covariance_matrix(&prepare_named(NamedState::PsiTheta { theta: th })?);
            for k in 1..=3 {
                let want = 4.0 * (1.0 - (th / 2.0).cos().powi(2 * k));
                worst = worst.max((faf(&m, k as u32)? - want).abs());
            }
        }
        Ok(Check::new("|Psi_theta>, k=1..3", worst < 1e-10, format!("max error {}", sci(worst)), "< 1e-10"))
    });
    let prod = guard("|Psi_theta,N>", || {
        let mut worst: f64 = 0.0;
        for n in [8usize, 12] {
            for &th in &thetas {
                let m = covariance_matrix(&prepare_named(NamedState::PsiThetaProduct { theta: th, n })?);
                for k in 1..=3 {
                    let want = n as f64 * (1.0 - (th / 2.0).cos().powi(2 * k));
                    worst = worst.max((faf(&m, k as u32)? - want).abs());
                }
            }
        }
        Ok(Check::new("|Psi_theta,N>, N=8,12", worst < 1e-10, format!("max error {}", sci(worst)), "< 1e-10"))
    });
    let t = guard("|T>^N", || {
        let mut worst: f64 = 0.0;
        for n in [4usize, 8] {
            for &th in &thetas {
                let m = covariance_matrix(&prepare_named(NamedState::TProduct { theta: th, phi: 0.3, n })?);
                for k in 1..=3 {
                    let want = 1.0 - th.cos().powi(2 * k * n as i32);
                    worst = worst.max((faf(&m, k as u32)? - want).abs());
                }
            }
        }
        Ok(Check::new("|T>^N, N=4,8", worst < 1e-10, format!("max error {}", sci(worst)), "< 1e-10"))
    });
    vec![psi, prod, t]
}

fn random_gaussian(n: usize, rng: &mut impl rand::Rng) -> Result<StateVector> {
    let circuit = random_matchgate_circuit(n, 8 * n, rng);
    apply_matchgates(&StateVector::zero(n)?, &circuit)
}

fn c2_gaussian(level: Level) -> Vec<Check> {
    let n = 6;
    let (states, circuits) = level.pick((5, 20), (20, 200));
    let inv = guard("invariance", || {
        let mut worst: f64 = 0.0;
        for s in 0..states {
            let mut rng = stream_rng(2, s as u64);
            let psi = haar_state(n, Sector::Generic, &mut rng)?;
            let base = fafs(&covariance_matrix(&psi), &[1, 2, 3])?;
            for _ in 0..circuits {
                let circuit = random_matchgate_circuit(n, 6 * n, &mut rng);
                let after = fafs(&covariance_matrix(&apply_matchgates(&psi, &circuit)?), &[1, 2, 3])?;
                worst = base.iter().zip(&after).fold(worst, |w, (a, b)| w.max((a - b).abs()));
            }
        }
        Ok(Check::new(
            &format!("{circuits} circuits x {states} states, N=6, k=1..3"),
            worst < 1e-9,
            format!("max |dF| {}", sci(worst)),
            "< 1e-9",
        ))
    });
    let faithful = guard("faithfulness", || {
        let mut rng = stream_rng(2, 10_000);
        let mut states = Vec::new();
        for _ in 0..level.pick(5, 20) {
            states.push(random_gaussian(n, &mut rng)?);
            states.push(haar_state(n, Sector::EvenParity, &mut rng)?);
        }
        for th in [0.0, 0.05, PI / 2.0, PI] {
            states.push(prepare_named(NamedState::PsiTheta { theta: th })?);
        }
        let (mut zero, mut mismatches) = (0, 0);
        for psi in &states {
            let m = covariance_matrix(psi);
            let is_zero = fafs(&m, &[1, 2, 3])?.iter().all(|f| f.abs() < 1e-9);
            let flat = williamson_eigenvalues(&m)?.iter().all(|l| (l - 1.0).abs() < 1e-8);
            zero += usize::from(is_zero);
            mismatches += usize::from(is_zero != flat);
        }
        Ok(Check::new(
            "F_k = 0 iff all Williamson eigenvalues are 1",
            mismatches == 0 && zero > 0 && zero < states.len(),
            format!("{mismatches} mismatches over {} states ({zero} Gaussian)", states.len()),
            "0 mismatches, both classes present",
        ))
    });
    vec![inv, faithful]
}

fn c3_typical(level: Level) -> Vec<Check> {
    let samples = level.pick(100, 500);
    let mut out = Vec::new();
    for n in [6usize, 8, 10] {
        for sector in [Sector::Generic, Sector::EvenParity] {
            let name = format!("N={n} {sector:?}");
            let checks = (|| -> Result<Vec<Check>> {
                let mut f = [Vec::new(), Vec::new()];
                for s in 0..samples {
                    let mut rng = stream_rng(3_000 + n as u64 * 2 + u64::from(sector == Sector::EvenParity), s as u64);
                    let m = covariance_matrix(&haar_state(n, sector, &mut rng)?);
                    f[0].push(faf(&m, 1)?);
                    f[1].push(faf(&m, 2)?);
                }
                let mut v = Vec::new();
                for k in 1..=2u32 {
                    let xs = &f[k as usize - 1];
                    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
                    let se = (var / xs.len() as f64).sqrt();
                    let typ = typical_faf(n, k, sector)?;
                    v.push(Check::new(
                        &format!("{name} k={k}"),
                        (mean - typ).abs() < 3.0 * se,
                        format!("mean {mean:.5} (se {se:.1e}), |diff|/se {:.2}", (mean - typ).abs() / se),
                        format!("{typ:.5} within 3 se"),
                    ));
                }
                Ok(v)
            })();
            match checks {
                Ok(c) => out.extend(c),
                Err(e) => out.push(Check::errored(&name, e)),
            }
        }
    }
    out.push(guard("N=3 even sector", || {
        let mut worst: f64 = 0.0;
        for s in 0..50 {
            let m = covariance_matrix(&haar_state(3, Sector::EvenParity, &mut stream_rng(3_100, s))?);
            worst = fafs(&m, &[1, 2])?.iter().fold(worst, |w, f| w.max(f.abs()));
        }
        Ok(Check::new("N=3 even sector, 50 states", worst < 1e-10, format!("max F {}", sci(worst)), "identically 0"))
    }));
    out
}

fn c4_rmt(level: Level) -> Vec<Check> {
    let n = 256usize;
    let sigma2 = 1.0 / (8.0 * n as f64);
    let samples = level.pick(4, 20);
    let data = (|| -> Result<Vec<Vec<f64>>> {
        (0..samples).map(|s| Ok(random_covariance(n, sigma2, &mut stream_rng(4, s as u64))?.singular_values())).collect()
    })();
    let svs = match data {
        Ok(d) => d,
        Err(e) => return vec![Check::errored("sampling", e)],
    };
    let mut out = Vec::new();
    for k in 1..=3u32 {
        let mean: f64 = svs.iter().map(|sv| 0.5 * sv.iter().map(|s| s.powi(2 * k as i32)).sum::<f64>()).sum::<f64>() / samples as f64;
        let want = catalan(k) as f64 * 2f64.powi(k as i32) * (n as f64).powi(k as i32 + 1) * sigma2.powi(k as i32);
        let rel = (mean / want - 1.0).abs();
        out.push(Check::new(
            &format!("(1/2)E tr[(M^T M)^{k}], N=256"),
            rel < 0.05,
            format!("{mean:.5} vs {want:.5}, rel {rel:.4}"),
            "within 5%",
        ));
    }
    let moduli: Vec<f64> = svs[0].chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    let d = ks_statistic(&moduli, |x| 2.0 * semicircle_cdf(x, n, sigma2) - 1.0);
    let crit = ks_critical(moduli.len(), 0.01);
    out.push(Check::new("semicircle KS, 256 moduli", d < crit, format!("D = {d:.4}"), format!("< {crit:.4} (1% level)")));
    out
}

fn c5_commutant(level: Level) -> Vec<Check> {
    let mut out = Vec::new();
    let trials = level.pick(2, 5);
    for r in [vec![1, 1], vec![1, 1, 1, 1], vec![2, 2]] {
        for n in [3usize, 4] {
            let name = format!("invariance {r:?}, N={n}");
            out.push(guard(&name, || {
                let spec = ReplicaSpec::new(r.clone())?;
                let dev = invariance_check(&spec, n, trials, &mut stream_rng(5, n as u64 * 10 + r.len() as u64 + r[0] as u64))?;
                let check = Check::new(&name, dev < 1e-8, format!("max deviation {}", sci(dev)), "< 1e-8");
                Ok(if r.len() > 2 && r.iter().all(|&x| x == 1) { check.known(QUARTIC_SINGLETONS) } else { check })
            }));
        }
    }
    out.push(guard("phi_(2,2)", || {
        let psi = prepare_named(NamedState::PsiTheta { theta: PI / 2.0 })?.tensor(&StateVector::zero(2)?)?;
        let phi = phi_measure(&psi, &ReplicaSpec::new(vec![2, 2])?)?;
        let f1 = faf(&covariance_matrix(&psi), 1)?;
        Ok(Check::new(
            "phi_(2,2)(|Psi_pi/2> x |00>) vanishes while F1 > 0.1",
            phi.abs() < 1e-9 && f1 > 0.1,
            format!("phi {}, F1 {f1:.4}", sci(phi)),
            "|phi| < 1e-9, F1 > 0.1",
        ))
    }));
    out.push(guard("k=2 elements at N=2", || {
        let c = comm2_independent_count(2)?;
        Ok(Check::new("independent k=2 elements, N=2", c == 5, c.to_string(), "2N+1 = 5"))
    }));
    out
}

fn dense_oracle_check(circuits: usize) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for c in 0..circuits {
        let n = 2 + c % 5;
        let depth = 1 + (c / 5) % 6;
        let sym = if c % 2 == 0 { Symmetry::Generic } else { Symmetry::Z2 };
        let circuit = CircuitBuilder::brickwall(depth, sym).sample(n, &mut stream_rng(6, c as u64))?;
        let mut tab = StabilizerTableau::vacuum(n);
        tab.apply_circuit(&circuit)?;
        let psi = dense_circuit(&StateVector::zero(n)?, &circuit)?;
        for x in 0..1u64 << n {
            for z in 0..1u64 << n {
                let op = PauliOperator::from_masks(n, vec![x], vec![z], ((x & z).count_ones() % 4) as u8)?;
                let dense = expectation(&psi, &op)?;
                let stab = f64::from(pauli_expectation(&tab, &op)?);
                worst = worst.max((dense - Complex64::new(stab, 0.0)).norm());
                checked += 1;
            }
        }
        let f_tab = faf(&covariance_from_tableau(&tab), 1)?;
        let f_dense = faf(&covariance_matrix(&psi), 1)?;
        worst = worst.max((f_tab - f_dense).abs());
    }
    Ok(Check::new(
        &format!("{circuits} circuits, N=2..6, every Pauli expectation and F1"),
        worst < 1e-9,
        format!("max deviation {} over {checked} expectations", sci(worst)),
        "exact agreement (< 1e-9)",
    ))
}

fn c6_stabilizer(level: Level) -> Vec<Check> {
    let mut out = vec![guard("dense oracle", || dense_oracle_check(level.pick(20, 100)))];
    out.push(guard("z2 depth 1", || {
        let est = mc_faf1(&CircuitBuilder::brickwall(1, Symmetry::Z2), 128, 64, 61)?;
        Ok(Check::new("Z2 brick-wall depth 1, N=128", est.mean.abs() < 1e-12 && est.se == 0.0, format!("mean {} se {}", est.mean, est.se), "0"))
    }));
    out.push(guard("depth 30", || {
        let est = mc_faf1(&CircuitBuilder::brickwall(30, Symmetry::Generic), 128, level.pick(100, 400), 62)?;
        let typ = typical_faf(128, 1, Sector::Generic)?;
        let d = (est.mean - typ).abs();
        Ok(Check::new("N=128, depth 30", d < 0.1, format!("mean {:.4} (se {:.3}), |diff| {d:.4}", est.mean, est.se), "|mean - F_typ| < 0.1"))
    }));
    out.push(guard("alpha", || {
        let n = 256;
        let series = brickwall_series(n, 16, Symmetry::Generic, level.pick(40, 200), 63)?;
        let typ = typical_faf(n, 1, Sector::Generic)?;
        let pts: Vec<(f64, f64)> = series
            .iter()
            .enumerate()
            .skip(2)
            .filter(|(_, e)| typ - e.mean > 5.0 * e.se)
            .map(|(t, e)| (t as f64, (typ - e.mean) / n as f64))
            .collect();
        let fit = fit_decay(&pts)?;
        Ok(Check::new(
            "decay rate alpha_1, N=256",
            (0.35..=0.55).contains(&fit.alpha),
            format!("alpha {:.4} from t = {}..{}", fit.alpha, pts[0].0, pts[pts.len() - 1].0),
            "[0.35, 0.55]",
        ))
    }));
    out.push(guard("t_sat", || {
        let sizes: Vec<usize> = level.pick(vec![64, 128, 256], vec![64, 128, 256, 512, 1024]);
        let mut tsat = Vec::new();
        for &n in &sizes {
            let series = brickwall_series(n, 30, Symmetry::Generic, level.pick(40, 200), 64)?;
            let typ = typical_faf(n, 1, Sector::Generic)?;
            let ts: Vec<f64> = (0..series.len()).map(|t| t as f64).collect();
            let gaps: Vec<f64> = series.iter().map(|e| typ - e.mean).collect();
            tsat.push(saturation_time(&ts, &gaps, 1.0).ok_or_else(|| crate::Error::Convergence(format!("N={n} never saturates")))?);
        }
        let fit = linear_fit(&sizes.iter().map(|&n| (n as f64).ln()).collect::<Vec<_>>(), &tsat, None)?;
        Ok(Check::new(
            "t_sat(eps=1) vs log N",
            fit.correlation > 0.98,
            format!("t_sat {:?}, correlation {:.4}", tsat.iter().map(|t| format!("{t:.2}")).collect::<Vec<_>>(), fit.correlation),
            "> 0.98",
        ))
    }));
    out
}

fn c7_rmps(level: Level) -> Vec<Check> {
    let n = 256;
    let rs: Vec<usize> = level.pick((1..=5).collect(), (1..=7).collect());
    let samples = level.pick(100, 800);
    vec![guard("beta", || {
        let (mut xs, mut ys, mut ws, mut shown) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for &r in &rs {
            let est = rmps_faf1(n, r, Symmetry::Generic, samples, 7)?;
            let gap = faf1_gap(n, Symmetry::Generic, &est)?;
            shown.push(format!("chi={}: {:.3e}", 1 << r, gap / n as f64));
            if r >= 2 && gap > 0.0 {
                xs.push(((1usize << r) as f64).ln());
                ys.push((gap / n as f64).ln());
                ws.push((gap / est.se).powi(2));
            }
        }
        let fit = linear_fit(&xs, &ys, Some(&ws))?;
        let beta = -fit.slope;
        Ok(Check::new(
            "beta from dF1/N vs chi, N=256",
            (beta - 2.0).abs() <= 0.3,
            format!("beta {beta:.3} [{}]", shown.join(", ")),
            "2.0 +/- 0.3",
        ))
    })]
}

fn c8_equilibrium(level: Level) -> Vec<Check> {
    let mut out = Vec::new();
    out.push(guard("lambda=0 eigenstates", || {
        let n = level.pick(8, 10);
        let mut worst: f64 = 0.0;
        for h in [0.5, 1.5] {
            let ham = SpinHamiltonian::build(&ModelSpec::tfim(n, h, Boundary::Open))?;
            for rec in full_spectrum_scan(&ham, &[1, 2])? {
                worst = rec.faf.iter().fold(worst, |w, f| w.max(f.abs()));
            }
        }
        Ok(Check::new(&format!("all eigenstates at lambda=0, N={n}, k=1,2"), worst < 1e-8, format!("max F {}", sci(worst)), "< 1e-8"))
    }));
    out.push(guard("impurity lambda^2", || {
        let lambdas = [0.0125, 0.025, 0.05, 0.1];
        let mut fs = Vec::new();
        for &l in &lambdas {
            fs.push(ground_state_faf(&ModelSpec::impurity(12, 2.0, l, Boundary::Open), &[1])?[0]);
        }
        let fit = linear_fit(&lambdas.map(f64::ln), &fs.iter().map(|f| f.ln()).collect::<Vec<_>>(), None)?;
        Ok(Check::new(
            "impurity ground-state F1 vs lambda (N=12, h_z=2)",
            (fit.slope - 2.0).abs() <= 0.1,
            format!("log-log slope {:.4}", fit.slope),
            "2.0 +/- 0.1",
        ))
    }));
    out.push(guard("binder", || {
        let spec = ModelSpec::annni(8, 0.4, 0.3, Boundary::Periodic);
        let pairs = [(8usize, 10usize), (10, 12), (12, 14)];
        let mut crossings = Vec::new();
        for &(a, b) in &pairs {
            crossings.push((a, b, binder_crossing(&spec, a, b, 0.3, 0.6, 1e-5)?));
        }
        let fit = extrapolate_crossings(&crossings)?;
        let hc = fit.intercept;
        Ok(Check::new(
            "ANNNI lambda=0.3 Binder crossing",
            (hc - 0.44).abs() <= 0.02,
            format!(
                "h_c {hc:.4} extrapolated in (mean N)^-2 from crossings {}",
                crossings.iter().map(|c| format!("{}/{}: {:.4}", c.0, c.1, c.2)).collect::<Vec<_>>().join(", ")
            ),
            "0.44 +/- 0.02",
        ))
    }));
    let lambda = 0.3;
    out.push(guard("PE periodic", || {
        let mut worst: f64 = 0.0;
        let mut cov: f64 = 0.0;
        for n in [8usize, 10, 12] {
            let (h, mpe) = pe_covariance(n, lambda)?;
            let gs = ground_state(&SpinHamiltonian::build(&ModelSpec::annni(n, h, lambda, Boundary::Periodic))?)?;
            let m = sector_covariance(n, &gs.complex_vector())?;
            worst = worst.max(faf(&m, 1)?.abs());
            let s = pe_duality(n)?;
            cov = cov.max((m.matrix() - &s * mpe.matrix() * s.transpose()).amax());
        }
        Ok(Check::new(
            "PE point, periodic, N=8,10,12",
            worst < 1e-8 && cov < 1e-6,
            format!("max F1 {}, max correlator deviation {}", sci(worst), sci(cov)),
            "F1 < 1e-8, correlators within 1e-6",
        ))
    }));
    out.push(guard("PE open", || {
        let mut fs = Vec::new();
        for n in [8usize, 10, 12] {
            let (h, _) = pe_covariance(n, lambda)?;
            fs.push(ground_state_faf(&ModelSpec::annni(n, h, lambda, Boundary::Open), &[1])?[0]);
        }
        let spread = fs.iter().cloned().fold(f64::MIN, f64::max) - fs.iter().cloned().fold(f64::MAX, f64::min);
        Ok(Check::new(
            "PE point, open, N=8,10,12",
            spread < 0.05,
            format!("F1 {:?}, spread {spread:.2e}", fs.iter().map(|f| format!("{f:.5}")).collect::<Vec<_>>()),
            "size-independent within 0.05",
        ))
    }));
    out.push(guard("PE closed form", || {
        let n = 8;
        let (_, mpe) = pe_covariance(n, lambda)?;
        let (h, c) = crate::free_fermion::pe_parameters(lambda)?;
        let _ = h;
        let psi = prepare_named(NamedState::PeGround { theta: c.acos(), n })?;
        let dev = (covariance_matrix(&psi).matrix() - mpe.matrix()).amax();
        Ok(Check::new("closed-form PE correlators vs dense state, N=8", dev < 1e-6, format!("max deviation {}", sci(dev)), "< 1e-6"))
    }));
    out
}

/// Average of quench series over `count` random initial states.
fn averaged_quench(spec: &ModelSpec, grid: &TimeGrid, window: (f64, f64), count: usize, seed: u64) -> Result<(DynamicsSeries, f64)> {
    let times = grid.times()?;
    let runs = (0..count as u64)
        .map(|s| dynamics_faf(spec, &[1], &times, window, random_initial_state(spec.n, seed, s), 1e-10))
        .collect::<Result<Vec<_>>>()?;
    let avg = DynamicsSeries::average(&runs, window)?;
    let drift = avg.energy_drift;
    Ok((avg, drift))
}

fn c9_dynamics(level: Level) -> Vec<Check> {
    let mut out = Vec::new();
    out.push(guard("mid spectrum", || {
        let n = level.pick(10, 12);
        let ham = SpinHamiltonian::build(&ModelSpec::annni(n, 1.0, 1.0, Boundary::Open))?;
        let recs = full_spectrum_scan(&ham, &[1])?;
        let mid = mid_spectrum_mean(&recs, n, 0);
        let typ = typical_faf(n, 1, Sector::EvenParity)?;
        let edge_count = (recs.len() / 20).max(1);
        let edge = |r: &[crate::ed_lab::EigenRecord]| r.iter().map(|x| x.faf[0]).sum::<f64>() / r.len() as f64;
        let low = edge(&recs[..edge_count]);
        let high = edge(&recs[recs.len() - edge_count..]);
        Ok(Check::new(
            &format!("ANNNI lambda=1, N={n}: mid-spectrum mean and parabola"),
            (mid - typ).abs() < 0.5 && low < mid && high < mid,
            format!("mid {mid:.4} vs F_typ {typ:.4}; lowest/highest 5% {low:.3}/{high:.3}"),
            "|mid - F_typ| < 0.5, edges below center",
        ))
    }));
    let count = level.pick(2, 8);
    let (grid, window) = level.pick(
        (TimeGrid { t_max: 100.0, ..TimeGrid::default() }, (50.0, 100.0)),
        (TimeGrid { t_max: 200.0, ..TimeGrid::default() }, (100.0, 200.0)),
    );
    let impurity = |n: usize| ModelSpec::impurity(n, 1.0, 1.0, Boundary::Open);
    let imp14 = averaged_quench(&impurity(14), &grid, window, count, 91);
    out.push(guard("linear growth", || {
        let (avg, drift) = imp14.as_ref().map_err(clone_err)?;
        let fit = early_growth_fit(avg, 0, 0.1, 0.5)?;
        let r2 = fit.correlation.powi(2);
        Ok(Check::new(
            "impurity N=14 early growth",
            fit.slope > 0.0 && r2 > 0.98 && *drift < 1e-8,
            format!("slope {:.3}, R^2 {r2:.4}, energy drift {}", fit.slope, sci(*drift)),
            "positive slope, R^2 > 0.98",
        ))
    }));
    out.push(guard("ANNNI growth", || {
        let g = TimeGrid { linear_until: 2.0, t_max: 2.0, ..TimeGrid::default() };
        let (avg, _) = averaged_quench(&ModelSpec::annni(14, 1.0, 1.0, Boundary::Open), &g, (1.0, 2.0), count, 92)?;
        let f = *avg.faf[0].last().expect("grid ends at t=2");
        Ok(Check::new("ANNNI N=14, F1 at t=2", f > 7.0, format!("{f:.4}"), "> 0.5 N = 7"))
    }));
    out.push(guard("gamma", || {
        let (avg, _) = imp14.as_ref().map_err(clone_err)?;
        let rep = saturation_analysis(avg, 0, 1.0, None)?;
        let gamma = rep.gamma.ok_or_else(|| crate::Error::Convergence("too few points for the relaxation fit".into()))?;
        Ok(Check::new(
            "impurity N=14 relaxation exponent",
            (1.6..=2.2).contains(&gamma),
            format!("gamma {gamma:.3} from {} points, F_inf {:.4}", rep.fit_points, avg.f_infinity[0]),
            "[1.6, 2.2]",
        )
        .known(GAMMA_FINITE_SIZE))
    }));
    out.push(guard("t_sat", || {
        let mut ts = Vec::new();
        for n in [10usize, 12] {
            let (avg, _) = averaged_quench(&impurity(n), &grid, window, count, 91)?;
            ts.push(saturation_analysis(&avg, 0, 1.0, None)?.t_sat);
        }
        let (avg, _) = imp14.as_ref().map_err(clone_err)?;
        ts.push(saturation_analysis(avg, 0, 1.0, None)?.t_sat);
        let vals: Option<Vec<f64>> = ts.iter().copied().collect();
        let ok = vals.as_ref().is_some_and(|v| v.windows(2).all(|w| w[1] > w[0]));
        Ok(Check::new("impurity t_sat, N=10,12,14", ok, format!("{ts:.3?}"), "strictly increasing"))
    }));
    out
}

fn clone_err(e: &crate::Error) -> crate::Error {
    crate::Error::Convergence(e.to_string())
}

fn c10_nge(level: Level) -> Vec<Check> {
    let mut out = Vec::new();
    out.push(guard("Gaussian", || {
        let mut rng = stream_rng(10, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..level.pick(5, 20) {
            worst = worst.max(nge_infinity(&covariance_matrix(&random_gaussian(6, &mut rng)?))?.abs());
        }
        Ok(Check::new("NGE_inf on Gaussian states, N=6", worst < 1e-9, format!("max {}", sci(worst)), "0"))
    }));
    out.push(guard("near-Gaussian", || {
        let mut rng = stream_rng(10, 1);
        let mut worst: f64 = 0.0;
        let mut min_lambda: f64 = 1.0;
        for i in 0..level.pick(4, 10) {
            let eps = 0.01 + 0.004 * i as f64;
            let g = random_gaussian(6, &mut rng)?;
            let phase = |s: f64| Complex64::from_polar(1.0, s * eps);
            let zz = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![phase(-1.0), phase(1.0), phase(1.0), phase(-1.0)]));
            let psi = apply_unitary(&g, &zz, &[2, 4])?;
            let m = covariance_matrix(&psi);
            min_lambda = williamson_eigenvalues(&m)?.iter().fold(min_lambda, |a, &b| a.min(b));
            let f1 = faf(&m, 1)?;
            worst = worst.max((nge_infinity(&m)? - 0.5 * f1).abs() / f1);
        }
        Ok(Check::new(
            "|NGE_inf - F1/2| / F1 for lambda_i > 0.99",
            worst < 0.01 && min_lambda > 0.99,
            format!("max ratio {worst:.4}, min lambda {min_lambda:.5}"),
            "< 0.01",
        )
        .known(NGE_LOG_BASE))
    }));
    out.push(guard("Haar", || {
        let mut worst: f64 = 0.0;
        for s in 0..level.pick(5, 20) {
            let m = covariance_matrix(&haar_state(10, Sector::Generic, &mut stream_rng(10, 100 + s))?);
            worst = worst.max((nge_infinity(&m)? - faf(&m, 1)?).abs());
        }
        Ok(Check::new("|NGE_inf - F1| on Haar states, N=10", worst < 0.05, format!("max {worst:.4}"), "< 0.05").known(NGE_HAAR))
    }));
    out.push(guard("finite q", || {
        let mut rng = stream_rng(10, 2);
        let mut bad = 0;
        let mut count = 0;
        for i in 1..=8 {
            let th = PI * i as f64 / 8.0;
            let base = prepare_named(NamedState::PsiTheta { theta: th })?;
            let extended = apply_matchgates(&base.tensor(&StateVector::zero(1)?)?, &random_matchgate_circuit(5, 20, &mut rng))?;
            for psi in [base, extended] {
                let q: Vec<f64> = (1..=4).map(|q| nge_finite_q(&psi, q)).collect::<Result<_>>()?;
                bad += usize::from(!q.windows(2).all(|w| w[1] >= w[0] - 1e-10));
                count += 1;
            }
        }
        Ok(Check::new("NGE_q nondecreasing in q = 1..4, N=4,5", bad == 0, format!("{bad} of {count} states violate"), "0"))
    }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_marks_known_failures() {
        let r = CriterionReport {
            id: 10,
            title: "x",
            checks: vec![Check::new("a", true, "1", "1"), Check::new("b", false, "2", "1").known("reason")],
            seconds: 0.0,
        };
        assert!(!r.passed());
        assert!(!r.blocking());
        assert!(r.render().starts_with("FAIL criterion 10"));
        assert!(r.render().contains("known failure: reason"));
    }
}
