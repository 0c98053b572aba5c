use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_varcycle"))
}

fn diag_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/diag.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn verify_diag_config() {
    let out = run(&["verify", "--config", diag_config().to_str().unwrap()]);
    let rep = report(&out);
    assert_eq!(rep["payload"]["passed"], Value::Bool(true));
    assert_eq!(rep["tool_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn decompose_complex_regime_emits_no_basis() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("m");
    let out = run(&[
        "decompose",
        "--n",
        "3",
        "--alpha",
        "0.5",
        "--beta",
        "0.7",
        "--dump-matrices",
        dump.to_str().unwrap(),
    ]);
    let rep = report(&out);
    assert_eq!(rep["payload"]["regime"], "complex_conjugate");
    assert_eq!(rep["payload"]["basis_emitted"], Value::Bool(false));
    assert!(dump.join("M.csv").exists());
    assert!(!dump.join("Q.csv").exists());
}

#[test]
fn decompose_dumps_full_precision_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "decompose",
        "--config",
        diag_config().to_str().unwrap(),
        "--dump-matrices",
        dir.path().to_str().unwrap(),
    ]);
    let rep = report(&out);
    assert_eq!(rep["payload"]["regime"], "diagonalizable_real");
    let q = csv_rows(&dir.path().join("Q.csv"));
    let qi = csv_rows(&dir.path().join("Qinv.csv"));
    assert_eq!(q.len(), 6);
    let parse = |m: &Vec<Vec<String>>| -> Vec<Vec<f64>> {
        m.iter().map(|r| r.iter().map(|v| v.parse().unwrap()).collect()).collect()
    };
    let (q, qi) = (parse(&q), parse(&qi));
    for i in 0..6 {
        for j in 0..6 {
            let v: f64 = (0..6).map(|k| q[i][k] * qi[k][j]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12);
        }
    }
}

#[test]
fn simulate_both_writes_two_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("traj.csv");
    let out = run(&[
        "simulate",
        "--config",
        diag_config().to_str().unwrap(),
        "--method",
        "both",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    let rep = report(&out);
    let dev = rep["payload"]["comparison"]["relative"].as_f64().unwrap();
    assert!(dev < 1e-8);
    for tag in ["recursive", "explicit"] {
        let rows = csv_rows(&dir.path().join(format!("traj.{tag}.csv")));
        assert_eq!(rows[0], ["t", "x_1", "x_2", "x_3", "y_1", "y_2", "y_3", "xbar", "ybar"]);
        assert_eq!(rows.len(), 202);
    }
}

#[test]
fn z0_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let z0 = dir.path().join("z0.csv");
    std::fs::write(&z0, "1,2,3,4,5,6\n").unwrap();
    let out_path = dir.path().join("t.csv");
    let arg = format!("csv:{}", z0.display());
    let out = run(&[
        "simulate",
        "--config",
        diag_config().to_str().unwrap(),
        "--method",
        "recursive",
        "--z0",
        &arg,
        "--T",
        "3",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    report(&out);
    let rows = csv_rows(&out_path);
    assert_eq!(rows[1][..7], ["0", "1", "2", "3", "4", "5", "6"]);
}

#[test]
fn explicit_in_complex_regime_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("x.csv");
    let out = run(&[
        "simulate",
        "--n",
        "2",
        "--alpha",
        "0.5",
        "--beta",
        "0.5",
        "--method",
        "explicit",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    let parsed: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(parsed["error"], "WrongRegime");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn misspelled_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"model": {"n": 2, "alpha": 0.1, "beta": 0.9, "a": [0.5, 0.5], "bb": [0.5, 0.5]}}"#).unwrap();
    let out = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("bb"), "{err}");
}

#[test]
fn invalid_weights_exit_2() {
    let out = run(&["decompose", "--n", "2", "--alpha", "0.1", "--beta", "0.9", "--a", "0.5,0.6"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("WeightViolation"));
}

fn strip_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn config_echo_reproduces_payload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = diag_config();
    let cfg = cfg.to_str().unwrap();
    let cases: [&[&str]; 4] = [
        &["simulate", "--config", cfg, "--seed", "11"],
        &["moments", "--config", cfg, "--mc-reps", "200", "--seed", "11"],
        &["decompose", "--config", cfg],
        &["cycle", "--T", "100", "--seed", "3", "--analyze"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let first = report(&run(args));
        let echo = dir.path().join(format!("{i}.json"));
        std::fs::write(&echo, first["config_echo"].to_string()).unwrap();
        let second = report(&run(&[args[0], "--config", echo.to_str().unwrap()]));
        assert_eq!(strip_timing(first), strip_timing(second), "{}", args[0]);
    }
}

#[test]
fn cycle_csv_and_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("c.csv");
    let out = run(&[
        "cycle",
        "--alpha",
        "1.09804",
        "--beta",
        "0.7",
        "--T",
        "300",
        "--seed",
        "4",
        "--x0",
        "1",
        "--x1",
        "-0.5",
        "--analyze",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    let rep = report(&out);
    let p = &rep["payload"];
    for key in ["kappa1", "kappa2", "delta1", "rho_mod", "omega", "predicted_period", "estimated_period", "invertible"] {
        assert!(!p[key].is_null(), "{key}");
    }
    let rows = csv_rows(&out_path);
    assert_eq!(rows[0], ["t", "xbar", "h"]);
    assert_eq!(rows.len(), 302);
    assert_eq!(rows[1][1], "1");
    assert_eq!(rows[2][1], "-0.5");
}

#[test]
fn fig_a_default_run() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("fig_a.csv");
    let rep = report(&run(&["fig-a", "--out", out_path.to_str().unwrap()]));
    let p = &rep["payload"];
    let est = p["estimated_period"].as_f64().unwrap();
    let want = p["predicted_period"].as_f64().unwrap();
    assert!((want - 4.324).abs() < 1e-3);
    assert!((est / want - 1.0).abs() < 0.10, "{est}");
    assert_eq!(csv_rows(&out_path).len(), 702);
}

#[test]
fn fig_a_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    report(&run(&["fig-a", "--seed", "7", "--out", a.to_str().unwrap()]));
    report(&run(&["fig-a", "--seed", "7", "--out", b.to_str().unwrap()]));
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn fig_a_short_run_warns() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("short.csv");
    let out = run(&["fig-a", "--T", "64", "--out", out_path.to_str().unwrap()]);
    let rep = report(&out);
    assert!(rep["warnings"][0].as_str().unwrap().contains("too short"));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("warning:"));
    assert_eq!(csv_rows(&out_path).len(), 66);
}

#[test]
fn report_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let rp = dir.path().join("r.json");
    let out = run(&["verify", "--config", diag_config().to_str().unwrap(), "--report", rp.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(rp).unwrap()).unwrap();
    assert_eq!(rep["payload"]["passed"], Value::Bool(true));
}
