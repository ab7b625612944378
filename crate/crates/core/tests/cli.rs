use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_argmaxlab"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn read_report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const OU: &str = r#"{
  "kind": "identity-1d",
  "process": {"type": "gaussian", "kernel": {"family": "ornstein_uhlenbeck", "gamma": 1.0, "sigma": 1.4142135623730951}},
  "grid": {"kind": "uniform", "n": 256, "horizon": 1.0},
  "replicates": 2000,
  "seed": 5
}"#;

#[test]
fn identity_run_writes_report_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ou.json", OU);
    let out = tmp.path().join("out");
    let o = run(&["verify-identity", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS identity-1d/covariance"), "{stdout}");
    let report = read_report(&out);
    assert_eq!(report["kind"], "identity-1d");
    assert_eq!(report["passed"], true);
    let ids = report["results"][0]["identities"].as_array().unwrap();
    assert!(ids.iter().any(|i| i["name"] == "ou_form"));
    let table = std::fs::read_to_string(out.join("tables.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("experiment,lhs,lhs_se,rhs,rhs_se,z,n"));
    assert!(lines.next().unwrap().starts_with("identity-1d/covariance,"));
}

#[test]
fn non_diagonal_anchors_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bridge.json",
        r#"{
  "kind": "bridge-check",
  "process": {"type": "gaussian", "kernel": {"family": "brownian_sheet_frontier", "horizon": [1.0, 1.0]}},
  "grid": {"kind": "product", "n": [4, 4], "horizon": [1.0, 1.0]},
  "anchors": [[1.0, 1.0], [0.0, 1.0]],
  "replicates": 100
}"#,
    );
    let o = run(&["verify-bridge", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("condition (1)"), "{err}");
    assert!(!tmp.path().join("report.json").exists());
}

#[test]
fn malformed_config_names_field_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", "{\n  \"kind\": \"identity-1d\",\n  \"replicates\": -3\n}");
    let o = run(&["verify-identity", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("replicates") && err.contains("line 3"), "{err}");

    let cfg = write_config(tmp.path(), "typo.json", "{\"kind\": \"identity-1d\", \"replicate\": 10}");
    let err = String::from_utf8_lossy(&run(&["verify-identity", "--config", cfg.to_str().unwrap()]).stderr).to_string();
    assert!(err.contains("replicate"), "{err}");
}

#[test]
fn kind_must_match_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ou.json", OU);
    let o = run(&["levy-cases", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("identity-1d"));
}

#[test]
fn failing_gate_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let body = OU.replace("\"seed\": 5", "\"seed\": 5, \"gates\": {\"max_abs_z\": 0.0}");
    let cfg = write_config(tmp.path(), "strict.json", &body);
    let out = tmp.path().join("out");
    let o = run(&["verify-identity", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL identity-1d/covariance"));
    assert_eq!(read_report(&out)["passed"], false);
}

#[test]
fn runs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ou.json", OU);
    let mut reports = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        assert!(run(&["verify-identity", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status
            .success());
        let mut r = read_report(&out);
        r.as_object_mut().unwrap().remove("wall_clock_seconds");
        r["config"].as_object_mut().unwrap().remove("output");
        reports.push(r);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn merge_pools_replicates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ou.json", OU);
    let mut dirs = Vec::new();
    for seed in ["11", "12"] {
        let out = tmp.path().join(seed);
        let o = run(&[
            "verify-identity",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        dirs.push(out);
    }
    let merged = tmp.path().join("merged");
    let a = dirs[0].join("report.json");
    let b = dirs[1].join("report.json");
    let o = run(&["report-merge", "--out", merged.to_str().unwrap(), a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let id = |dir: &Path| read_report(dir)["results"][0]["identities"][0].clone();
    let (m, one) = (id(&merged), id(&dirs[0]));
    assert_eq!(m["n"], 4000);
    assert_eq!(read_report(&merged)["config"]["replicates"], 4000);
    assert!(m["lhs_se"].as_f64().unwrap() < one["lhs_se"].as_f64().unwrap());
    assert!(m["rhs_se"].as_f64().unwrap() < one["rhs_se"].as_f64().unwrap());

    let other = tmp.path().join("levy.json");
    std::fs::write(
        &other,
        r#"{"kind": "levy-cases", "process": {"type": "levy", "triplet": {"c": 1.0, "sigma": 0.0, "rate": 1.0}},
            "grid": {"kind": "uniform", "n": 64, "horizon": 1.0}, "replicates": 50}"#,
    )
    .unwrap();
    let lout = tmp.path().join("levy");
    run(&["levy-cases", "--config", other.to_str().unwrap(), "--out", lout.to_str().unwrap()]);
    let l = lout.join("report.json");
    let o = run(&["report-merge", "--out", merged.to_str().unwrap(), a.to_str().unwrap(), l.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_writes_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "levy.json",
        r#"{
  "process": {"type": "levy", "triplet": {"c": 0.0, "sigma": 1.0, "rate": 5.0}},
  "grid": {"kind": "uniform", "n": 32, "horizon": 1.0},
  "replicates": 2,
  "seed": 3
}"#,
    );
    let out = tmp.path().join("sim");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let path = std::fs::read_to_string(out.join("path.csv")).unwrap();
    assert_eq!(path.lines().count(), 34);
    assert!(out.join("jumps.csv").exists());
    assert!(!out.join("report.json").exists());
}

#[test]
fn grid_override_and_lpp() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "lpp.json",
        r#"{"kind": "lpp-geodesic", "lpp": {"stages": 2, "resolution": 8}, "replicates": 500, "seed": 1}"#,
    );
    let out = tmp.path().join("lpp");
    let o = run(&["lpp-geodesic", "--config", cfg.to_str().unwrap(), "--grid-n", "16", "--out", out.to_str().unwrap()]);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
    let r = read_report(&out);
    assert_eq!(r["config"]["lpp"]["resolution"], 16);
    let names: Vec<String> = r["results"][0]["identities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(names, ["covariance_1", "covariance_2", "exchange_1_2"]);
}
