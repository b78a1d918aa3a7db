//! Experiment configuration, seeding, result tables and the verification battery.

mod suite;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dense_state::{covariance_matrix, prepare_named, NamedState};
use crate::ed_lab::{
    dynamics_faf, full_spectrum_scan, ground_state, random_initial_state, saturation_analysis, sector_covariance,
    binder_sector, DynamicsSeries, Model, ModelSpec, SpinHamiltonian, TimeGrid,
};
use crate::free_fermion::{ground_covariance, ising_critical_correlator, pe_covariance, pe_duality, tfim_hamiltonian, Boundary};
use crate::nongauss::{faf, nge_infinity};
use crate::stabilizer_mc::{brickwall_series, rmps_faf1, Symmetry};
use crate::{Error, Result};

pub use suite::{
    run_criterion, verify_selected, verify_suite, Check, CriterionReport, Level, SuiteReport, CRITERIA, PAPER_GOLDEN_CRITERIA,
};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Independent generator for sample `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Process exit status of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    InvariantFailure = 1,
    ConfigError = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Parse(_)
            | Error::InvalidArgument(_)
            | Error::Unsupported(_)
            | Error::SizeCap { .. }
            | Error::ModeOutOfRange { .. }
            | Error::Io(_) => ExitStatus::ConfigError,
            _ => ExitStatus::InvariantFailure,
        }
    }
}

/// A list of values, or `"start:stop:count"` with inclusive ends (`pi`, `2pi`, `pi/4`, `3*pi/4` accepted).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range(String),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::Values(v) if v.is_empty() => Err(Error::Config("empty grid".into())),
            Grid::Values(v) => Ok(v.clone()),
            Grid::Range(s) => parse_grid(s),
        }
    }
}

pub fn parse_scalar(s: &str) -> Result<f64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    let bad = || Error::Parse(format!("cannot read number '{s}'"));
    match t.find("pi") {
        None => t.parse().map_err(|_| bad()),
        Some(i) => {
            let coef = t[..i].trim_end_matches('*');
            let coef: f64 = match coef {
                "" => 1.0,
                "-" => -1.0,
                c => c.parse().map_err(|_| bad())?,
            };
            let rest = &t[i + 2..];
            let div: f64 = match rest.strip_prefix('/') {
                None if rest.is_empty() => 1.0,
                None => return Err(bad()),
                Some(d) => d.parse().map_err(|_| bad())?,
            };
            Ok(coef * std::f64::consts::PI / div)
        }
    }
}

pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("grid '{s}' is not start:stop:count")));
    }
    let a = parse_scalar(parts[0])?;
    let b = parse_scalar(parts[1])?;
    let n: usize = parts[2].trim().parse().map_err(|_| Error::Parse(format!("bad grid count in '{s}'")))?;
    match n {
        0 => Err(Error::Config(format!("grid '{s}' has no points"))),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
    }
}

fn default_ks() -> Vec<u32> {
    vec![1, 2]
}

fn default_symmetry() -> Symmetry {
    Symmetry::Generic
}

fn default_one() -> usize {
    1
}

fn default_late_window() -> (f64, f64) {
    (1000.0, 2000.0)
}

fn default_tolerance() -> f64 {
    1e-10
}

/// Experiment-specific parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// `ℱ_k` and `NGE_∞` of `|Ψ_θ⟩` over a θ grid.
    NamedStates {
        theta_grid: Grid,
        #[serde(default = "default_ks")]
        ks: Vec<u32>,
    },
    /// Brick-wall Clifford circuits from the vacuum, every depth up to `depth`.
    CircuitFaf {
        n: usize,
        depth: usize,
        samples: usize,
        #[serde(default = "default_symmetry")]
        symmetry: Symmetry,
    },
    /// Staircase ensembles with bond dimension `2^r`.
    RmpsFaf {
        n: usize,
        r: Vec<usize>,
        samples: usize,
        #[serde(default = "default_symmetry")]
        symmetry: Symmetry,
    },
    /// `|⟨iγ_1γ_{1+2r}⟩|` of the TFIM ground state.
    TfimCorrelators { n: Vec<usize>, h_z: f64, bc: Boundary },
    /// Closed-form line covariance against the periodic ANNNI ground state.
    PeCheck { n: Vec<usize>, lambda: f64 },
    /// Ground-state `ℱ_k` (and Binder cumulant) over sizes and fields.
    GsScan {
        model: Model,
        n: Vec<usize>,
        h_z: Grid,
        bc: Boundary,
        #[serde(default = "default_ks")]
        ks: Vec<u32>,
    },
    /// Every eigenstate of the even sector.
    SpectrumScan {
        model: Model,
        n: Vec<usize>,
        h_z: f64,
        bc: Boundary,
        #[serde(default = "default_ks")]
        ks: Vec<u32>,
    },
    /// Quench from random computational basis states.
    Dynamics {
        model: Model,
        n: Vec<usize>,
        h_z: f64,
        bc: Boundary,
        #[serde(default = "default_ks")]
        ks: Vec<u32>,
        #[serde(default = "default_one")]
        initial_states: usize,
        #[serde(default)]
        time_grid: TimeGrid,
        #[serde(default = "default_late_window")]
        late_window: (f64, f64),
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::NamedStates { .. } => "named-states",
            Experiment::CircuitFaf { .. } => "circuit-faf",
            Experiment::RmpsFaf { .. } => "rmps-faf",
            Experiment::TfimCorrelators { .. } => "tfim-correlators",
            Experiment::PeCheck { .. } => "pe-check",
            Experiment::GsScan { .. } => "gs-scan",
            Experiment::SpectrumScan { .. } => "spectrum-scan",
            Experiment::Dynamics { .. } => "dynamics",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Experiment::CircuitFaf { .. } | Experiment::RmpsFaf { .. } | Experiment::Dynamics { .. })
    }

    /// Rows the result table must contain.
    pub fn expected_rows(&self) -> Result<usize> {
        Ok(match self {
            Experiment::NamedStates { theta_grid, .. } => theta_grid.values()?.len(),
            Experiment::CircuitFaf { depth, .. } => depth + 1,
            Experiment::RmpsFaf { r, .. } => r.len(),
            Experiment::TfimCorrelators { n, .. } => n.iter().map(|&n| 2 * n - 1).sum(),
            Experiment::PeCheck { n, .. } => n.iter().map(|&n| n * (2 * n - 1)).sum(),
            Experiment::GsScan { n, h_z, .. } => n.len() * h_z.values()?.len(),
            Experiment::SpectrumScan { n, .. } => n.iter().map(|&n| 1usize << (n - 1)).sum(),
            Experiment::Dynamics { n, initial_states, time_grid, .. } => n.len() * initial_states * time_grid.times()?.len(),
        })
    }
}

/// A complete run description, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; the machine default when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub experiment: Experiment,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        Self { name: None, seed, workers: None, out: None, experiment }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON, ignoring `workers` and `out`.
    pub fn hash(&self) -> String {
        let canonical = Self { workers: None, out: None, ..self.clone() };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Column-labelled result rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV with a `#` comment header carrying version, experiment, config hash and seed.
    pub fn to_csv(&self, config: &ExperimentConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# faf-kit {TOOLKIT_VERSION}");
        let _ = writeln!(s, "# experiment: {}", config.experiment.name());
        let _ = writeln!(s, "# config_hash: {}", config.hash());
        let _ = writeln!(s, "# seed: {}", config.seed);
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Result table plus human-readable summary lines.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub table: ResultTable,
    pub notes: Vec<String>,
}

/// Execute a config on `workers` threads; tasks are merged in index order.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    let expected = config.experiment.expected_rows()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        if w == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let out = pool.install(|| execute(config))?;
    if out.table.len() != expected {
        return Err(Error::Convergence(format!("table has {} rows, grid declares {expected}", out.table.len())));
    }
    Ok(out)
}

/// [`run`] and write the CSV to `config.out` when set.
pub fn run_to_file(config: &ExperimentConfig) -> Result<RunOutput> {
    let out = run(config)?;
    if let Some(path) = &config.out {
        write_atomic(path, &out.table.to_csv(config))?;
    }
    Ok(out)
}

fn faf_columns(ks: &[u32]) -> Vec<String> {
    ks.iter().map(|k| format!("F{k}")).collect()
}

fn check_ks(ks: &[u32]) -> Result<()> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("k list must be non-empty with k ≥ 1".into()));
    }
    Ok(())
}

fn execute(config: &ExperimentConfig) -> Result<RunOutput> {
    let seed = config.seed;
    let mut notes = Vec::new();
    let table = match &config.experiment {
        Experiment::NamedStates { theta_grid, ks } => {
            check_ks(ks)?;
            let mut t = ResultTable::new(std::iter::once("theta".to_string()).chain(faf_columns(ks)).chain(["nge_inf".to_string()]));
            for theta in theta_grid.values()? {
                let m = covariance_matrix(&prepare_named(NamedState::PsiTheta { theta })?);
                let mut row = vec![fmt_f64(theta)];
                for &k in ks {
                    row.push(fmt_f64(faf(&m, k)?));
                }
                row.push(fmt_f64(nge_infinity(&m)?));
                t.push(row);
            }
            t
        }
        Experiment::CircuitFaf { n, depth, samples, symmetry } => {
            let series = brickwall_series(*n, *depth, *symmetry, *samples, seed)?;
            let mut t = ResultTable::new(["N", "depth", "samples", "mean", "se", "seed"]);
            for (d, est) in series.iter().enumerate() {
                t.push(vec![n.to_string(), d.to_string(), samples.to_string(), fmt_f64(est.mean), fmt_f64(est.se), seed.to_string()]);
            }
            t
        }
        Experiment::RmpsFaf { n, r, samples, symmetry } => {
            let mut t = ResultTable::new(["N", "chi", "samples", "mean", "se", "seed"]);
            for &ri in r {
                let est = rmps_faf1(*n, ri, *symmetry, *samples, seed)?;
                t.push(vec![n.to_string(), (1usize << ri).to_string(), samples.to_string(), fmt_f64(est.mean), fmt_f64(est.se), seed.to_string()]);
            }
            t
        }
        Experiment::TfimCorrelators { n, h_z, bc } => {
            let mut t = ResultTable::new(["N", "r", "value", "closed_form"]);
            for &ni in n {
                let (m, degenerate) = ground_covariance(&tfim_hamiltonian(ni, *h_z, *bc)?)?;
                if degenerate {
                    notes.push(format!("N={ni}: degenerate single-particle level, one ground state chosen"));
                }
                for b in 2..=2 * ni {
                    let r = (b - 1) as f64 / 2.0;
                    let closed = if *bc == Boundary::Periodic && (*h_z - 1.0).abs() < 1e-12 {
                        fmt_f64(ising_critical_correlator(ni, r)?)
                    } else {
                        String::new()
                    };
                    t.push(vec![ni.to_string(), fmt_f64(r), fmt_f64(m.matrix()[(0, b - 1)].abs()), closed]);
                }
            }
            t
        }
        Experiment::PeCheck { n, lambda } => {
            let mut t = ResultTable::new(["N", "m", "n", "closed_form", "ed", "abs_diff"]);
            for &ni in n {
                let (h, mpe) = pe_covariance(ni, *lambda)?;
                let s = pe_duality(ni)?;
                let target = &s * mpe.matrix() * s.transpose();
                let spec = ModelSpec::annni(ni, h, *lambda, Boundary::Periodic);
                let gs = ground_state(&SpinHamiltonian::build(&spec)?)?;
                let m = sector_covariance(ni, &gs.complex_vector())?;
                notes.push(format!("N={ni}: h_PE={h}, ground-state F1={}", faf(&m, 1)?));
                for a in 1..=2 * ni {
                    for b in a + 1..=2 * ni {
                        let (c, e) = (target[(a - 1, b - 1)], m.matrix()[(a - 1, b - 1)]);
                        t.push(vec![ni.to_string(), a.to_string(), b.to_string(), fmt_f64(c), fmt_f64(e), fmt_f64((c - e).abs())]);
                    }
                }
            }
            t
        }
        Experiment::GsScan { model, n, h_z, bc, ks } => {
            check_ks(ks)?;
            let fields = h_z.values()?;
            let tasks: Vec<(usize, f64)> = n.iter().flat_map(|&ni| fields.iter().map(move |&h| (ni, h))).collect();
            let rows = tasks
                .par_iter()
                .map(|&(ni, h)| -> Result<Vec<String>> {
                    let spec = ModelSpec::new(*model, ni, h, *bc);
                    let gs = ground_state(&SpinHamiltonian::build(&spec)?)?;
                    let m = sector_covariance(ni, &gs.complex_vector())?;
                    let mut row = vec![ni.to_string(), fmt_f64(h), fmt_f64(spec.lambda()), fmt_f64(gs.energy), fmt_f64(gs.residual)];
                    for &k in ks {
                        row.push(fmt_f64(faf(&m, k)?));
                    }
                    row.push(fmt_f64(binder_sector(ni, &gs.vector)));
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut t = ResultTable::new(
                ["N", "h_z", "lambda", "energy", "residual"].map(String::from).into_iter().chain(faf_columns(ks)).chain(["binder".to_string()]),
            );
            rows.into_iter().for_each(|r| t.push(r));
            t
        }
        Experiment::SpectrumScan { model, n, h_z, bc, ks } => {
            check_ks(ks)?;
            let mut t = ResultTable::new(
                ["N", "index", "energy"].map(String::from).into_iter().chain(faf_columns(ks)).chain(["entropy".to_string()]),
            );
            for &ni in n {
                let h = SpinHamiltonian::build(&ModelSpec::new(*model, ni, *h_z, *bc))?;
                for (i, rec) in full_spectrum_scan(&h, ks)?.into_iter().enumerate() {
                    let mut row = vec![ni.to_string(), i.to_string(), fmt_f64(rec.energy)];
                    row.extend(rec.faf.iter().map(|&f| fmt_f64(f)));
                    row.push(fmt_f64(rec.entropy));
                    t.push(row);
                }
            }
            t
        }
        Experiment::Dynamics { model, n, h_z, bc, ks, initial_states, time_grid, late_window, tolerance } => {
            check_ks(ks)?;
            if *initial_states == 0 {
                return Err(Error::Config("initial_states must be positive".into()));
            }
            let times = time_grid.times()?;
            let mut t = ResultTable::new(
                ["N", "sample", "initial_state", "t"].map(String::from).into_iter().chain(faf_columns(ks)),
            );
            for &ni in n {
                let spec = ModelSpec::new(*model, ni, *h_z, *bc);
                let runs = (0..*initial_states as u64)
                    .into_par_iter()
                    .map(|s| dynamics_faf(&spec, ks, &times, *late_window, random_initial_state(ni, seed, s), *tolerance))
                    .collect::<Result<Vec<_>>>()?;
                for (s, run) in runs.iter().enumerate() {
                    if run.energy_drift > 1e-8 {
                        return Err(Error::Convergence(format!("energy drift {:e} at N={ni}, sample {s}", run.energy_drift)));
                    }
                    let init = run.initial_state.expect("single run").to_string();
                    for (j, time) in run.times.iter().enumerate() {
                        let mut row = vec![ni.to_string(), s.to_string(), init.clone(), fmt_f64(*time)];
                        row.extend(run.faf.iter().map(|f| fmt_f64(f[j])));
                        t.push(row);
                    }
                }
                let avg = DynamicsSeries::average(&runs, *late_window)?;
                for (i, k) in ks.iter().enumerate() {
                    let rep = saturation_analysis(&avg, i, 1.0, None)?;
                    notes.push(format!(
                        "N={ni} k={k}: F_inf={:.6} t_sat={} gamma={}",
                        avg.f_infinity[i],
                        rep.t_sat.map_or("censored".into(), |v| format!("{v:.4}")),
                        rep.gamma.map_or("n/a".into(), |v| format!("{v:.4}")),
                    ));
                }
            }
            t
        }
    };
    Ok(RunOutput { table, notes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = parse_grid("0:pi:5").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[4] - std::f64::consts::PI).abs() < 1e-15);
        assert!((parse_scalar("3*pi/4").unwrap() - 0.75 * std::f64::consts::PI).abs() < 1e-15);
        assert!((parse_scalar("2pi").unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_scalar("p1").is_err());
    }

    #[test]
    fn hash_ignores_workers() {
        let a = ExperimentConfig::new(Experiment::PeCheck { n: vec![8], lambda: 0.3 }, 3);
        let mut b = a.clone();
        b.workers = Some(4);
        assert_eq!(a.hash(), b.hash());
        b.seed = 4;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{"seed": 5, "experiment": {"type": "gs-scan", "model": {"kind": "annni", "lambda": 0.3},
            "n": [8, 10], "h_z": "0.3:0.6:4", "bc": "periodic"}}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.experiment.expected_rows().unwrap(), 8);
        assert!(ExperimentConfig::from_json(r#"{"experiment": {"type": "nope"}}"#).is_err());
        let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
