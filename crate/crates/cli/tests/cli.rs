use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kdvstar"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, value.to_string()).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

/// `u_j = (1 + t)(1/2 + b_j x + c_j x^2)`: quadratic in x, so the
/// discrete operator is exact on it, and continuous at the vertex.
fn small_mms(mode: &str, m: usize) -> Value {
    let edge = |b: f64, c: f64| vec![vec![0.5, 0.5], vec![b, b], vec![c, c]];
    json!({
        "graph": {"n_edges": 3, "lengths": [1.0, 1.2, 0.9], "alpha": 2.0},
        "manufactured": {"poly": [edge(0.3, -0.2), edge(-0.1, 0.4), edge(0.2, 0.1)]},
        "horizon": 0.25,
        "nodes_per_edge": m,
        "dt": 0.25 / 16.0,
        "mode": mode,
    })
}

fn quintic_mms(m: usize) -> Value {
    let q = [
        [0.5, 0.8, -1.1, 0.6, 0.3, -0.25],
        [0.5, -0.4, 0.9, -0.7, 0.5, -0.15],
        [0.5, 0.2, 0.3, -0.9, 0.6, -0.2],
    ];
    let poly: Vec<Vec<Vec<f64>>> = q
        .iter()
        .map(|p| p.iter().map(|&c| vec![c, 0.5 * c]).collect())
        .collect();
    json!({
        "graph": {"n_edges": 3, "lengths": [1.0, 1.25, 1.5], "alpha": 2.0},
        "manufactured": {"poly": poly},
        "horizon": 0.5,
        "nodes_per_edge": m,
        "mode": "linear",
    })
}

#[test]
fn check_compat_passing_case_exits_zero() {
    let o = run(&["check-compat", "--config", shipped("compat_pass.json").to_str().unwrap(), "--s", "2.8"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["verdict"], json!(true));
    assert!(v["records"].as_array().unwrap().len() >= 3);
}

#[test]
fn check_compat_threshold_variant_exits_two() {
    let o = run(&["check-compat", "--config", shipped("compat_fail.json").to_str().unwrap(), "--s", "2.8"]);
    assert_eq!(o.status.code(), Some(2));
    let v = stdout_json(&o);
    assert_eq!(v["verdict"], json!(false));
    // the only failing record is the flux line, off by g0(0) - 3
    let failed: Vec<&Value> = v["records"].as_array().unwrap().iter().filter(|r| r["pass"] == json!(false)).collect();
    assert_eq!(failed.len(), 1);
    assert!((failed[0]["residual"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn check_compat_below_flux_threshold_ignores_vertex_flux() {
    // at s = 3/2 only continuity and Dirichlet traces are required
    let o = run(&["check-compat", "--config", shipped("compat_fail.json").to_str().unwrap(), "--s", "1.5"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn unknown_subcommand_exits_one_with_usage() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn missing_lengths_names_the_key() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({"graph": {"n_edges": 3, "alpha": 2.0}, "initial": {"poly": [[0.0], [0.0], [0.0]]},
                "horizon": 1.0, "nodes_per_edge": 16, "mode": "linear"}),
    );
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("lengths"), "{err}");
}

#[test]
fn small_alpha_is_reported_with_its_field_path() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({"graph": {"n_edges": 3, "lengths": [1, 1, 1], "alpha": 1.0},
                "initial": {"poly": [[0.0], [0.0], [0.0]]},
                "horizon": 1.0, "nodes_per_edge": 16, "mode": "linear"}),
    );
    let o = run(&["lift", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("graph.alpha"), "{err}");
}

#[test]
fn simulate_writes_tables_and_a_single_manifest() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let mut cfg = small_mms("nonlinear", 16);
    cfg["output"] = json!({"cadence": 4});
    let cfg = write_config(dir.path(), "c.json", &cfg);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--dump-operator"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(out.join("snapshots.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,edge,x,u"));
    // 16 steps at cadence 4: t = 0 plus 4 snapshots, 3 edges of 17 nodes
    assert_eq!(lines.count(), 5 * 3 * 17);

    let ledger: Value = serde_json::from_str(&fs::read_to_string(out.join("ledger.json")).unwrap()).unwrap();
    assert_eq!(ledger["residual"].as_array().unwrap().len(), 16);

    let op = fs::read_to_string(out.join("operator.csv")).unwrap();
    assert!(op.starts_with("row,col,value\n"));
    let mut seen = std::collections::HashSet::new();
    for l in op.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        let rc: (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        assert!(rc.0 < 51 && rc.1 < 51);
        assert!(seen.insert(rc), "duplicate entry {rc:?}");
    }

    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], json!(0));
    assert_eq!(manifest["config"]["theta"], json!(0.5));
    assert_eq!(manifest["config"]["picard"]["tol"], json!(1e-9));
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 4);
    for p in outputs {
        assert!(Path::new(p.as_str().unwrap()).starts_with(&out));
    }
    let mut names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["ledger.json", "manifest.json", "operator.csv", "snapshots.csv", "steps.json"]);
}

#[test]
fn runs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_mms("nonlinear", 16));
    let mut tables = Vec::new();
    let mut hashes = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        tables.push(fs::read_to_string(out.join("snapshots.csv")).unwrap());
        let m: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        hashes.push(m["config_sha256"].as_str().unwrap().to_string());
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(hashes[0].len(), 64);
}

#[test]
fn no_output_directory_means_no_files() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), "c.json", &small_mms("linear", 16));
    let o = bin()
        .current_dir(dir.path())
        .args(["simulate", "--config", "c.json"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["n_steps"], json!(16));
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest: {"));
    let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1, "only the config file should exist");
}

#[test]
fn dump_operator_without_output_directory_is_an_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_mms("linear", 16));
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--dump-operator"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn strict_simulate_rejects_incompatible_data() {
    let o = run(&[
        "simulate",
        "--config",
        shipped("compat_fail.json").to_str().unwrap(),
        "--strict",
    ]);
    // the shipped config has no compat section, so strict has nothing to check
    assert_eq!(o.status.code(), Some(0));

    let dir = TempDir::new().unwrap();
    let mut v: Value = serde_json::from_str(&fs::read_to_string(shipped("compat_fail.json")).unwrap()).unwrap();
    v["compat"] = json!({"s": 2.8});
    let cfg = write_config(dir.path(), "c.json", &v);
    let lax = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(lax.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&lax.stderr).contains("warning"));
    let strict = run(&["simulate", "--config", cfg.to_str().unwrap(), "--strict"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn quadratic_profiles_converge_exactly() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_mms("linear", 8));
    let o = run(&["convergence", "--config", cfg.to_str().unwrap(), "--levels", "3", "--assert-order"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["final_order"], json!("exact"));
}

#[test]
fn asserted_order_gates_the_exit_code() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("conv");
    let cfg = write_config(dir.path(), "c.json", &quintic_mms(16));
    let o = run(&["convergence", "--config", cfg.to_str().unwrap(), "--levels", "3", "--assert-order", "1.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let order = stdout_json(&o)["final_order"].as_f64().unwrap();
    assert!(order > 1.5 && order < 2.5, "order {order}");

    let o = run(&[
        "convergence",
        "--config",
        cfg.to_str().unwrap(),
        "--levels",
        "3",
        "--assert-order",
        "3.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("m,dt,l2_error,order"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", &quintic_mms(16));
    let args = ["convergence", "--config", cfg.to_str().unwrap(), "--levels", "3"];
    let one = bin().env("KDVSTAR_THREADS", "1").args(args).output().unwrap();
    let all = bin().env_remove("KDVSTAR_THREADS").args(args).output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, all.stdout);
}

#[test]
fn lift_reports_satisfied_constraints() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({"graph": {"n_edges": 4, "lengths": [0.5, 1.0, 2.0, 3.0], "alpha": 2.5},
                "initial": {"poly": [[0.0], [0.0], [0.0], [0.0]]},
                "horizon": 1.0, "nodes_per_edge": 16, "mode": "linear"}),
    );
    let o = run(&["lift", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!(v["max_constraint_residual"].as_f64().unwrap() <= 1e-12);
    for key in ["phi", "psi", "theta"] {
        assert_eq!(v[key]["edges"].as_array().unwrap().len(), 4);
    }
}

#[test]
fn energy_audit_of_homogeneous_data_never_gains_energy() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("audit");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(shipped("energy_decay.json")).unwrap()).unwrap();
    v["nodes_per_edge"] = json!(32);
    v["horizon"] = json!(2.0);
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = run(&["energy-audit", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout_json(&o);
    assert!(s["max_energy_increase"].as_f64().unwrap() <= 1e-10);
    let csv = fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + s["steps"].as_u64().unwrap() as usize);
}

#[test]
fn picard_window_contracts() {
    let dir = TempDir::new().unwrap();
    let mut v = small_mms("nonlinear", 16);
    v["picard"] = json!({"tol": 1e-10});
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = run(&["picard", "--config", cfg.to_str().unwrap(), "--window", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout_json(&o);
    assert_eq!(s["converged"], json!(true));
    assert!(s["final_ratio"].as_f64().unwrap() < 1.0);

    let o = run(&["picard", "--config", cfg.to_str().unwrap(), "--window", "5"]);
    assert_eq!(o.status.code(), Some(1), "window beyond the horizon is rejected");
}
