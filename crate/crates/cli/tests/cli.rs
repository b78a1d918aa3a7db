use std::path::Path;
use std::process::{Command, Output};

fn faf_kit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faf-kit")).args(args).output().expect("spawn faf-kit")
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn named_states_writes_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("named.csv");
    let res = faf_kit(&["named-states", "--theta-grid", "0:pi:9", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = read(&out);
    assert!(csv.starts_with("# faf-kit "));
    assert!(csv.contains("# config_hash: "));
    assert!(csv.contains("# seed: 0"));
    assert!(csv.contains("theta,F1,F2,nge_inf"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 9);
    let last: Vec<f64> = rows[8].split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[1] - 4.0).abs() < 1e-10);
}

#[test]
fn circuit_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for (p, w) in paths.iter().zip(["1", "3"]) {
        let res = faf_kit(&["circuit-faf", "--N", "48", "--depth", "6", "--samples", "30", "--seed", "7", "--workers", w, "--out", p.to_str().unwrap()]);
        assert!(res.status.success());
    }
    let a = read(&paths[0]);
    assert_eq!(a, read(&paths[1]));
    assert_eq!(data_rows(&a).len(), 7);
    assert!(data_rows(&a).iter().all(|r| r.ends_with(",7")));
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"seed": 3, "experiment": {"type": "rmps-faf", "n": 32, "r": [1, 2], "samples": 10}}"#).unwrap();
    let res = faf_kit(&["rmps-faf", "--config", cfg.to_str().unwrap(), "--seed", "5"]);
    assert!(res.status.success());
    let csv = String::from_utf8(res.stdout).unwrap();
    assert!(csv.contains("# seed: 5"));
    assert_eq!(data_rows(&csv).len(), 2);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"seed": 3, "typo": 1, "experiment": {"type": "rmps-faf", "n": 32, "r": [1], "samples": 10}}"#).unwrap();
    assert_eq!(faf_kit(&["rmps-faf", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&cfg, r#"{"experiment": {"type": "rmps-faf", "n": 32, "r": [1], "samples": 10}}"#).unwrap();
    assert_eq!(faf_kit(&["circuit-faf", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(faf_kit(&["circuit-faf", "--N", "8", "--depth", "2"]).status.code(), Some(2));
    assert_eq!(faf_kit(&["named-states", "--theta-grid", "0:pi"]).status.code(), Some(2));
    assert_eq!(faf_kit(&["spectrum-scan", "--N", "20"]).status.code(), Some(2));
    assert_eq!(faf_kit(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn commutant_check_exit_codes() {
    let ok = faf_kit(&["commutant-check", "--r", "2,2", "--N", "3", "--trials", "2"]);
    assert_eq!(ok.status.code(), Some(0));
    let quartic = faf_kit(&["commutant-check", "--r", "1,1,1,1", "--N", "3", "--trials", "2"]);
    assert_eq!(quartic.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&quartic.stdout).contains("false"));
}

#[test]
fn scans_match_declared_grids() {
    let gs = faf_kit(&["gs-scan", "--model", "annni", "--lambda", "0.3", "--N", "6,8", "--h-z", "0.2:0.6:3", "--bc", "periodic"]);
    assert!(gs.status.success());
    assert_eq!(data_rows(&String::from_utf8(gs.stdout).unwrap()).len(), 6);
    let spec = faf_kit(&["spectrum-scan", "--N", "6", "--h-z", "0.8", "--k", "1"]);
    assert!(spec.status.success());
    assert_eq!(data_rows(&String::from_utf8(spec.stdout).unwrap()).len(), 32);
    let dyn_ = faf_kit(&["dynamics", "--model", "impurity", "--lambda", "1", "--N", "6", "--t-max", "3", "--late-window", "1:3", "--initial-states", "2"]);
    assert!(dyn_.status.success());
    assert_eq!(data_rows(&String::from_utf8(dyn_.stdout).unwrap()).len(), 2 * 13);
    let pe = faf_kit(&["pe-check", "--N", "6"]);
    assert!(pe.status.success());
    assert_eq!(data_rows(&String::from_utf8(pe.stdout).unwrap()).len(), 66);
    let tc = faf_kit(&["tfim-correlators", "--N", "8"]);
    assert!(tc.status.success());
    assert_eq!(data_rows(&String::from_utf8(tc.stdout).unwrap()).len(), 15);
}

#[test]
fn verify_paper_goldens_reports_every_criterion() {
    let strict = faf_kit(&["verify", "--suite", "paper-goldens"]);
    let text = String::from_utf8(strict.stdout).unwrap();
    for id in [1, 5, 8] {
        assert!(text.contains(&format!("criterion {id:>2}:")), "{text}");
    }
    // The four-singleton commutant check fails with a documented reason.
    assert!(text.contains("known failure"));
    assert_eq!(strict.status.code(), Some(1));
    assert_eq!(faf_kit(&["verify", "--suite", "paper-goldens", "--allow-known"]).status.code(), Some(0));
}
