use faf_core::harness::{run, run_to_file, ExitStatus, Experiment, ExperimentConfig, Grid, TOOLKIT_VERSION};
use faf_core::ed_lab::{Model, TimeGrid};
use faf_core::free_fermion::Boundary;
use faf_core::stabilizer_mc::Symmetry;
use faf_core::Error;

fn csv(config: &ExperimentConfig) -> String {
    run(config).unwrap().table.to_csv(config)
}

fn configs() -> Vec<ExperimentConfig> {
    vec![
        ExperimentConfig::new(Experiment::NamedStates { theta_grid: Grid::Range("0:pi:7".into()), ks: vec![1, 2, 3] }, 0),
        ExperimentConfig::new(Experiment::CircuitFaf { n: 40, depth: 8, samples: 24, symmetry: Symmetry::Z2 }, 17),
        ExperimentConfig::new(Experiment::RmpsFaf { n: 32, r: vec![1, 2, 3], samples: 12, symmetry: Symmetry::Generic }, 5),
        ExperimentConfig::new(Experiment::TfimCorrelators { n: vec![8, 10], h_z: 1.0, bc: Boundary::Periodic }, 0),
        ExperimentConfig::new(Experiment::PeCheck { n: vec![6, 8], lambda: 0.3 }, 0),
        ExperimentConfig::new(
            Experiment::GsScan {
                model: Model::Annni { lambda: 0.3 },
                n: vec![6, 8],
                h_z: Grid::Values(vec![0.2, 0.4, 0.6]),
                bc: Boundary::Periodic,
                ks: vec![1],
            },
            0,
        ),
        ExperimentConfig::new(
            Experiment::SpectrumScan { model: Model::Annni { lambda: 1.0 }, n: vec![6], h_z: 1.0, bc: Boundary::Open, ks: vec![1, 2] },
            0,
        ),
        ExperimentConfig::new(
            Experiment::Dynamics {
                model: Model::Impurity { lambda: 1.0, site: None },
                n: vec![6, 8],
                h_z: 1.0,
                bc: Boundary::Open,
                ks: vec![1],
                initial_states: 3,
                time_grid: TimeGrid { linear_until: 2.0, t_max: 20.0, ..TimeGrid::default() },
                late_window: (10.0, 20.0),
                tolerance: 1e-10,
            },
            21,
        ),
    ]
}

#[test]
fn every_experiment_is_deterministic_and_fills_its_grid() {
    for config in configs() {
        let first = csv(&config);
        let mut threaded = config.clone();
        threaded.workers = Some(3);
        assert_eq!(first, csv(&threaded), "{}", config.experiment.name());
        let rows = first.lines().filter(|l| !l.starts_with('#')).count() - 1;
        assert_eq!(rows, config.experiment.expected_rows().unwrap(), "{}", config.experiment.name());
        assert!(first.starts_with(&format!("# faf-kit {TOOLKIT_VERSION}\n")));
        assert!(first.contains(&format!("# config_hash: {}\n", config.hash())));
        assert!(first.contains(&format!("# seed: {}\n", config.seed)));
    }
}

#[test]
fn stochastic_rows_carry_the_seed() {
    for config in configs().into_iter().filter(|c| c.experiment.is_stochastic()) {
        let out = csv(&config);
        let mut lines = out.lines().filter(|l| !l.starts_with('#'));
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let seed_col = header.iter().position(|h| *h == "seed" || *h == "initial_state");
        assert!(seed_col.is_some(), "{}", config.experiment.name());
    }
}

#[test]
fn seeds_change_stochastic_output() {
    let a = ExperimentConfig::new(Experiment::CircuitFaf { n: 40, depth: 6, samples: 24, symmetry: Symmetry::Generic }, 1);
    let mut b = a.clone();
    b.seed = 2;
    assert_ne!(a.hash(), b.hash());
    assert_ne!(csv(&a), csv(&b));
}

#[test]
fn output_files_are_written_whole() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = configs().remove(0);
    config.out = Some(dir.path().join("named.csv"));
    run_to_file(&config).unwrap();
    let text = std::fs::read_to_string(dir.path().join("named.csv")).unwrap();
    assert_eq!(text, csv(&config));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn json_configs_round_trip_and_reject_bad_input() {
    let text = r#"{
        "name": "scan",
        "seed": 4,
        "experiment": {"type": "gs-scan", "model": {"kind": "annni", "lambda": 0.3}, "n": [6], "h_z": "0.1:0.5:5", "bc": "periodic"}
    }"#;
    let config = ExperimentConfig::from_json(text).unwrap();
    assert_eq!(config.experiment.expected_rows().unwrap(), 5);
    assert_eq!(ExperimentConfig::from_json(&serde_json::to_string(&config).unwrap()).unwrap(), config);
    for bad in [
        r#"{"experiment": {"type": "gs-scan"}}"#,
        r#"{"experiment": {"type": "unknown"}}"#,
        r#"{"seed": -1, "experiment": {"type": "pe-check", "n": [6], "lambda": 0.3}}"#,
        r#"{"experiment": {"type": "pe-check", "n": [6], "lambda": 0.3, "extra": 1}}"#,
    ] {
        let e = ExperimentConfig::from_json(bad).unwrap_err();
        assert_eq!(ExitStatus::from_error(&e), ExitStatus::ConfigError, "{bad}");
    }
}

#[test]
fn runtime_errors_map_to_exit_codes() {
    let mut config = ExperimentConfig::new(Experiment::PeCheck { n: vec![6], lambda: 0.3 }, 0);
    config.workers = Some(0);
    assert_eq!(ExitStatus::from_error(&run(&config).unwrap_err()).code(), 2);
    let big = ExperimentConfig::new(
        Experiment::SpectrumScan { model: Model::Tfim, n: vec![20], h_z: 1.0, bc: Boundary::Open, ks: vec![1] },
        0,
    );
    assert_eq!(ExitStatus::from_error(&run(&big).unwrap_err()).code(), 2);
    assert_eq!(ExitStatus::from_error(&Error::Convergence("x".into())).code(), 1);
}
