use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fractal-riesz"))
        .current_dir(dir)
        .env_remove("FRACTAL_RIESZ_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(dir.path(), &[]).status.code(), Some(64));
}

#[test]
fn simulate_is_deterministic_and_embeds_config() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["simulate", "--H", "0.5", "--k", "1", "--n", "2", "--m", "129", "--seeds", "3", "--out", out];
    let a = run(dir.path(), &args("a"));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 1);
    assert!(run(dir.path(), &args("b")).status.success());
    for i in 0..3 {
        let name = format!("path_{i:04}.csv");
        let x = fs::read(dir.path().join("a").join(&name)).unwrap();
        assert_eq!(x, fs::read(dir.path().join("b").join(&name)).unwrap());
    }
    let side = json(&dir.path().join("a/path_0001.json"));
    assert_eq!(side["config"]["H"], 0.5);
    assert_eq!(side["config"]["seeds"], 3);
    assert_eq!(side["m"], 129);
    let head = fs::read_to_string(dir.path().join("a/path_0000.csv")).unwrap();
    assert!(head.starts_with("t_1,x_1,x_2\n0.0,0.0,0.0\n"));
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["simulate", "--H", "0.7", "--m", "257", "--out", "sim"]).status.success());
    write(dir.path(), "e.json", r#"{"field_csv": "sim/path_0000.csv", "alpha": 1.5}"#);
    let one = run(dir.path(), &["energy", "--config", "e.json", "--out", "w1", "--workers", "1"]);
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    let three = Command::new(env!("CARGO_BIN_EXE_fractal-riesz"))
        .current_dir(dir.path())
        .env("FRACTAL_RIESZ_WORKERS", "3")
        .args(["energy", "--config", "e.json", "--out", "w3"])
        .output()
        .unwrap();
    assert!(three.status.success());
    let e1 = json(&dir.path().join("w1/energy.json"))["result"]["self_energy"].as_f64().unwrap();
    let e3 = json(&dir.path().join("w3/energy.json"))["result"]["self_energy"].as_f64().unwrap();
    assert!((e1 - e3).abs() <= 1e-14 * e1.abs());
}

#[test]
fn constants_table_over_grid() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "grid.json", r#"{"n": [2], "alpha": [1.5], "H": [0.5], "eps": [0.5], "ell": [8], "M": [10000]}"#);
    let out = run(dir.path(), &["constants", "--grid", "grid.json", "--out", "c"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("c/constants.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let value = |name: &str| -> f64 {
        rows.iter().find(|r| &r[0] == name).unwrap()[8].parse().unwrap()
    };
    assert!((value("berman_C") / 41.4 - 1.0).abs() < 0.01);
    assert!((value("m1_bound") / 3361.77 - 1.0).abs() < 1e-4);
    assert!(value("rho1_bound") > 0.0);
    let meta = json(&dir.path().join("c/constants.meta.json"));
    assert_eq!(meta["config"]["ell"][0], 8);
}

#[test]
fn minimize_writes_result_field_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "self.json",
        r#"{"objective": "self_interaction", "alpha": 0.5, "gamma": 0.6, "rho": 1.0,
            "k": 1, "n": 2, "m": 33, "seed": 5, "optimizer": {"max_iters": 20}}"#,
    );
    let out = run(dir.path(), &["minimize", "--config", "self.json", "--out", "res"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = json(&dir.path().join("res/result.json"));
    assert!(res["result"]["objective_value"].as_f64().unwrap() <= res["result"]["init_objective"].as_f64().unwrap());
    assert_eq!(res["config"]["optimizer"]["max_iters"], 20);
    assert!(dir.path().join("res/field.csv").exists());
    let trace = fs::read_to_string(dir.path().join("res/trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,restart,objective,max_violation"));
}

#[test]
fn infeasible_cap_exits_with_constraint_code() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "nu.csv", "x_1,x_2,weight\n0.0,0.0,1.0\n");
    write(
        dir.path(),
        "cap.json",
        r#"{"objective": "mutual_interaction", "alpha": 0.5, "gamma": 0.6, "rho": 1.0,
            "k": 1, "n": 2, "m": 33, "medium_csv": "nu.csv", "cap_M": 1e-6,
            "optimizer": {"max_iters": 5}}"#,
    );
    let out = run(dir.path(), &["minimize", "--config", "cap.json", "--out", "res"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["energy", "--config", "missing.json"]).status.code(), Some(1));
    write(dir.path(), "bad.json", r#"{"alpha": 1.5, "surprise": 1}"#);
    assert_eq!(run(dir.path(), &["energy", "--config", "bad.json"]).status.code(), Some(1));
    write(
        dir.path(),
        "gate.json",
        r#"{"params": {"s": 0.5, "theta": 0.6, "p": 2, "q": 4, "r": 2, "beta": 0.25}, "corpus": {"count": 2, "m": 65}}"#,
    );
    let out = run(dir.path(), &["compose-verify", "--config", "gate.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1/p + s/q ≤ 1/r"));
}

#[test]
fn compose_verify_json_table() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "cv.json",
        r#"{"params": {"s": 0.5, "theta": 0.6, "p": 2, "q": 4, "r": 1.5, "beta": 0.25}, "corpus": {"count": 3, "m": 129}}"#,
    );
    let out = run(dir.path(), &["compose-verify", "--config", "cv.json", "--out", "cv", "--format", "json", "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = json(&dir.path().join("cv/ratios.json"));
    assert_eq!(table["rows"].as_array().unwrap().len(), 3);
    assert_eq!(table["config"]["corpus"]["seed"], 4);
    assert!(table["rows"][0]["ratio"].as_f64().unwrap().is_finite());
}

#[test]
fn koch_witness_and_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let gamma = 3f64.ln() / 4f64.ln();
    write(dir.path(), "w.json", &format!(r#"{{"kind": "koch", "gamma": {gamma}, "level": 6}}"#));
    let out = run(dir.path(), &["witness", "--config", "w.json", "--out", "w"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&dir.path().join("w/witness.json"));
    assert!(rep["result"]["bi_holder"]["ratio"].as_f64().unwrap() < 20.0);
    write(dir.path(), "d.json", r#"{"field_csv": "w/curve.csv"}"#);
    assert!(run(dir.path(), &["dimension", "--config", "d.json", "--out", "d"]).status.success());
    let d = json(&dir.path().join("d/dimension.json"))["result"]["estimate"].as_f64().unwrap();
    assert!((d - 4f64.ln() / 3f64.ln()).abs() < 0.15, "{d}");
}

#[test]
fn potential_and_moduli() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["simulate", "--H", "0.5", "--m", "513", "--out", "sim"]).status.success());
    write(dir.path(), "pts.csv", "x_1,x_2\n3.0,3.0\n");
    write(dir.path(), "p.json", r#"{"field_csv": "sim/path_0000.csv", "alpha": 1.5, "points_csv": "pts.csv"}"#);
    assert!(run(dir.path(), &["potential", "--config", "p.json", "--out", "p"]).status.success());
    let body = fs::read_to_string(dir.path().join("p/potential.csv")).unwrap();
    assert!(body.starts_with("x_1,x_2,potential\n3.0,3.0,"));
    write(dir.path(), "m.json", r#"{"field_csv": "sim/path_0000.csv", "kappa_plus": 0.45, "kappa_minus": 0.55}"#);
    let out = run(dir.path(), &["moduli", "--config", "m.json", "--out", "m"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("m/oscillation.csv").exists());
}
