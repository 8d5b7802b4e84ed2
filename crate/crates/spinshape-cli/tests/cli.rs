//! End-to-end tests of the spinshape binary: exit codes, file formats, and
//! reproducibility of the emitted data.

use std::path::Path;
use std::process::{Command, Output};

fn spinshape(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinshape"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should run")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("missing {name}: {e}"))
}

#[test]
fn levels_default_reference_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinshape(tmp.path(), &["levels"]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("threshold: 4.000000"));
    let csv = read(tmp.path(), "levels.csv");
    assert!(csv.contains("# threshold = 4.0000000000000000e0"));
    assert!(csv.contains("n,energy,degeneracy"));
    let data_rows: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("n,"))
        .collect();
    assert_eq!(data_rows.len(), 2);
    assert!(data_rows[1].starts_with("1,3.5555555555555"));
}

#[test]
fn levels_broken_susy_is_empty_with_note() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinshape(tmp.path(), &["levels", "--gamma", "0.5", "--beta", "2"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("supersymmetry is broken"));
    let csv = read(tmp.path(), "levels.csv");
    assert!(csv.contains("# broken_susy = true"));
}

#[test]
fn levels_json_format() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinshape(
        tmp.path(),
        &[
            "levels", "--format", "json", "--gamma", "3.5", "--beta", "0",
        ],
    );
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&read(tmp.path(), "levels.json")).unwrap();
    let rows = parsed["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4); // n < gamma for beta = 0
    assert_eq!(
        rows[1]["energy"].as_f64().unwrap(),
        3.5f64.powi(2) - 2.5f64.powi(2)
    );
}

#[test]
fn spectrum_is_reproducible_and_accurate() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["spectrum", "--grid.points", "800", "--sector", "both"];
    let out = spinshape(tmp.path(), &args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let first = read(tmp.path(), "spectrum.csv");
    assert!(first.contains("# kernel_dim_minus = 2"));
    assert!(first.contains("# kernel_dim_plus = 0"));
    // E1 row: minus sector, cluster 1
    let row = first
        .lines()
        .find(|l| l.starts_with("minus,1,1,2,"))
        .expect("E1 cluster row");
    let e1: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert!((e1 - 32.0 / 9.0).abs() < 5e-2, "E1 = {e1}");
    // bit-for-bit reproducible in the single-worker default
    let out2 = spinshape(tmp.path(), &args);
    assert!(out2.status.success());
    assert_eq!(first, read(tmp.path(), "spectrum.csv"));
}

#[test]
fn direct_scheme_spectrum_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinshape(
        tmp.path(),
        &[
            "spectrum",
            "--solver.scheme",
            "direct",
            "--grid.points",
            "700",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(tmp.path(), "spectrum.csv");
    assert!(csv.contains("# scheme = direct"));
    let row = csv
        .lines()
        .find(|l| l.starts_with("minus,1,1,2,"))
        .expect("E1 cluster row");
    let e1: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert!((e1 - 32.0 / 9.0).abs() < 5e-2, "direct-scheme E1 = {e1}");
}

#[test]
fn worker_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let serial = Command::new(env!("CARGO_BIN_EXE_spinshape"))
        .current_dir(tmp.path())
        .args(["spectrum", "--grid.points", "600", "--out", "serial"])
        .output()
        .unwrap();
    assert!(serial.status.success());
    let threaded = Command::new(env!("CARGO_BIN_EXE_spinshape"))
        .current_dir(tmp.path())
        .env("SPINSHAPE_THREADS", "4")
        .args(["spectrum", "--grid.points", "600", "--out", "threaded"])
        .output()
        .unwrap();
    assert!(threaded.status.success());
    assert_eq!(
        read(tmp.path(), "serial/spectrum.csv"),
        read(tmp.path(), "threaded/spectrum.csv"),
        "multi-worker run must be bit-identical"
    );
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "gamma": 3.5,
        "beta": 0.0,
        "lambda": 0.0,
        "grid": {"half_width": 20.0, "points": 700}
    }"#;
    std::fs::write(tmp.path().join("run.json"), cfg).unwrap();
    let out = spinshape(
        tmp.path(),
        &["levels", "--config", "run.json", "--gamma", "2.0"],
    );
    assert!(out.status.success());
    // the flag wins over the file: gamma = 2, beta = 0 has levels {0, 3}
    let csv = read(tmp.path(), "levels.csv");
    assert!(csv.contains("# gamma = 2"));
    assert!(csv.lines().any(|l| l.starts_with("1,3.0000000000000000e0")));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["levels", "--gamma", "-1"],
        vec!["levels", "--grid.points", "8"],
        vec!["spectrum", "--solver.tol", "0"],
        vec!["wavefunction", "-n", "7"],
    ] {
        let out = spinshape(tmp.path(), &args);
        assert_eq!(out.status.code(), Some(2), "args {args:?}: {out:?}");
    }
    // unknown config field
    std::fs::write(tmp.path().join("bad.json"), r#"{"gamm": 1.0}"#).unwrap();
    let out = spinshape(tmp.path(), &["levels", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes_and_writes_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinshape(tmp.path(), &["verify", "--skip-sweep"]);
    assert!(
        out.status.success(),
        "verify failed:\n{}\n{}",
        stdout(&out),
        String::from_utf8_lossy(&out.stderr)
    );
    let verdict: serde_json::Value =
        serde_json::from_str(&read(tmp.path(), "verify.json")).unwrap();
    assert_eq!(verdict["passed"], serde_json::Value::Bool(true));
    let checks = verdict["checks"].as_array().unwrap();
    assert!(checks.len() >= 12);
    for c in checks {
        assert_eq!(c["passed"], serde_json::Value::Bool(true), "check {c}");
        assert!(c["name"].is_string() && c["value"].is_number() && c["threshold"].is_number());
    }
}

#[test]
fn verify_broken_susy_checks_refusal_semantics() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinshape(
        tmp.path(),
        &[
            "verify",
            "--gamma",
            "0.5",
            "--beta",
            "2",
            "--grid.points",
            "900",
            "--skip-sweep",
        ],
    );
    assert!(
        out.status.success(),
        "broken-SUSY verify should pass its applicable checks:\n{}",
        stdout(&out)
    );
    let verdict: serde_json::Value =
        serde_json::from_str(&read(tmp.path(), "verify.json")).unwrap();
    let names: Vec<&str> = verdict["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"zero_mode_refusal"));
    assert!(!names.contains(&"ladder_rayleigh"), "no chain without levels");
}

#[test]
fn verify_sabotage_fails_with_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinshape(tmp.path(), &["verify", "--typo-eq41", "--skip-sweep"]);
    assert_eq!(out.status.code(), Some(4));
    let verdict: serde_json::Value =
        serde_json::from_str(&read(tmp.path(), "verify.json")).unwrap();
    let failed: Vec<&str> = verdict["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == serde_json::Value::Bool(false))
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, vec!["scheme_agreement"]);
}

#[test]
fn wavefunction_exports_orthonormal_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinshape(
        tmp.path(),
        &[
            "wavefunction",
            "-n",
            "0",
            "--grid.points",
            "900",
            "--gnuplot",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for m in [1, 2] {
        let csv = read(tmp.path(), &format!("wavefunction_n0_m{m}.csv"));
        assert!(csv.contains("# energy = 0.0000000000000000e0"));
        let norm: f64 = csv
            .lines()
            .find(|l| l.starts_with("# norm = "))
            .and_then(|l| l.trim_start_matches("# norm = ").parse().ok())
            .unwrap();
        assert!((norm - 1.0).abs() < 1e-12, "norm {norm}");
        assert!(csv.lines().any(|l| l.starts_with("z,re_psi1")));
    }
    assert!(tmp.path().join("wavefunction_n0.gp").exists());
}

#[test]
fn wavefunction_decoupled_member_has_single_active_component_and_one_node() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spinshape(
        tmp.path(),
        &[
            "wavefunction",
            "-n",
            "1",
            "--member",
            "1",
            "--gamma",
            "2",
            "--beta",
            "0",
            "--lambda",
            "0",
            "--grid.points",
            "1500",
            "--grid.half-width",
            "30",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(tmp.path(), "wavefunction_n1_m1.csv");
    assert!(!tmp.path().join("wavefunction_n1_m2.csv").exists());
    let mut active = Vec::new();
    let mut passive_sup = 0.0_f64;
    for line in csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('z'))
    {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        // im parts identically zero, one spin channel empty
        assert_eq!(cells[2], 0.0);
        assert_eq!(cells[4], 0.0);
        let (a, b) = (cells[1].abs(), cells[3].abs());
        if a >= b {
            active.push(cells[1]);
            passive_sup = passive_sup.max(b);
        } else {
            active.push(cells[3]);
            passive_sup = passive_sup.max(a);
        }
    }
    assert_eq!(
        passive_sup, 0.0,
        "decoupled member must stay single-channel"
    );
    let sup = active.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    let mut sign_changes = 0;
    let mut prev = 0.0_f64;
    for &x in &active {
        if x.abs() > 1e-4 * sup {
            if prev != 0.0 && x.signum() != prev.signum() {
                sign_changes += 1;
            }
            prev = x;
        }
    }
    assert_eq!(sign_changes, 1, "first excited state must show one node");
}
