use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hierpin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hierpin"))
        .args(args)
        .env_remove("HIERPIN_WORKERS")
        .output()
        .expect("binary runs")
}

fn record(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json record")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pure_value_and_bracket() {
    let r = record(&hierpin(&["pure", "--B", "1.5", "--h", "0.01", "--tol", "1e-8"]));
    let f = &r["result"]["free_energy"];
    let (lo, v, hi) = (f["lower"].as_f64().unwrap(), f["value"].as_f64().unwrap(), f["upper"].as_f64().unwrap());
    assert!(lo <= v && v <= hi && hi - lo <= 1e-8 && v > 0.0);
    assert_eq!(r["config"]["tol"], 1e-8);
    assert_eq!(r["command"], "pure");
}

#[test]
fn annealed_critical_brackets_uncorrelated_point() {
    let r = record(&hierpin(&["annealed", "critical", "--B", "1.5", "--kappa", "0", "--beta", "0.5", "--n", "14"]));
    let lo = r["result"]["h_lo"].as_f64().unwrap();
    let hi = r["result"]["h_hi"].as_f64().unwrap();
    assert!(lo <= -0.125 && -0.125 <= hi);
    assert!((0.5 * (lo + hi) + 0.125).abs() <= 0.02);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "[lattice]\nB = 1.5\nn = fourteen\n").unwrap();
    let out = hierpin(&["--config", path(&bad), "pure"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = hierpin(&["pure", "--B", "1.5"]);
    assert_eq!(out.status.code(), Some(2), "missing h");
    let out = hierpin(&["pure", "--B", "2.5", "--h", "0.1"]);
    assert_eq!(out.status.code(), Some(2), "invalid B");
    let out = hierpin(&["annealed", "weights", "--B", "1.5", "--kappa", "0.1", "--beta", "1", "--h", "0", "--n", "30"]);
    assert_eq!(out.status.code(), Some(3));
    let out = hierpin(&["annealed", "critical", "--B", "1.5", "--kappa", "0.6", "--beta", "0.5"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn records_reproduce_independently_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.json"), dir.path().join("b.json"), dir.path().join("c.json"));
    let args = ["quenched", "--B", "1.3", "--kappa", "0.2", "--beta", "0.8", "--h-grid", "-0.3,0,0.2", "--n", "6", "--samples", "40"];
    let run = |out: &Path, workers: &str| {
        let mut v: Vec<&str> = args.to_vec();
        v.extend(["--workers", workers, "--out", path(out)]);
        assert!(hierpin(&v).status.success());
        std::fs::read(out).unwrap()
    };
    let first = run(&a, "1");
    assert_eq!(first, run(&b, "3"));

    // re-running the persisted record gives the same bytes
    let out = hierpin(&["run", "--config", path(&a), "--out", path(&c)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first, std::fs::read(&c).unwrap());
}

#[test]
fn text_config_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "[run]\ncommand = annealed.profile\n[lattice]\nB = 1.1\nn = 10\n[disorder]\nkappa = 0.2\nbeta = 0.3\n",
    )
    .unwrap();
    let csv = dir.path().join("profile.csv");
    let r = record(&hierpin(&["run", "--config", path(&cfg), "--csv", path(&csv)]));
    assert_eq!(r["result"]["rows"].as_array().unwrap().len(), 11);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("B,kappa,beta,n,h,logZa"));
    assert_eq!(text.lines().count(), 12);

    // flags override the file; the resolved config prints back as text
    let out = hierpin(&["run", "--config", path(&cfg), "--n", "8", "--print-config"]);
    let printed = String::from_utf8(out.stdout).unwrap();
    assert!(printed.contains("n = 8") && printed.contains("tol = 1e-7"), "{printed}");

    let out = hierpin(&["--config", path(&cfg), "pure"]);
    assert_eq!(out.status.code(), Some(2), "command mismatch");
}

#[test]
fn relevance_commands_run() {
    let r = record(&hierpin(&["relevance", "yn", "--B", "1.4142135623730951", "--n", "9"]));
    assert!((r["result"]["y_n"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    let r = record(&hierpin(&[
        "relevance", "overlap", "--B", "1.6", "--kappa", "0.1", "--n-from", "3", "--n", "5", "--samples", "2000",
    ]));
    assert_eq!(r["result"]["series"]["stats"].as_array().unwrap().len(), 3);
    let r = record(&hierpin(&[
        "relevance", "fm", "--B", "1.3", "--kappa", "0.1", "--beta", "0", "--h", "-0.3", "--n", "6", "--samples", "8",
    ]));
    assert!(r["result"]["certified_level"].is_number());
    let out = hierpin(&["relevance", "strong", "--B", "1.3", "--kappa", "0.3", "--beta", "1", "--h", "-0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scan_labels_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let scan = |bs: &str, kappas: &str, betas: &str| {
        hierpin(&["scan", "--bs", bs, "--kappas", kappas, "--betas", betas, "--n", "12", "--out", path(dir.path())])
    };
    let out = scan("1.1", "0.2,0.45,0.6", "0.5");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let points: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("phase_points.json")).unwrap()).unwrap();
    let labels: Vec<&str> = points.as_array().unwrap().iter().map(|p| p["regime"].as_str().unwrap()).collect();
    assert_eq!(labels, ["ANNEALED_PURE_LIKE", "ANNEALED_ANOMALOUS", "NO_TRANSITION"]);
    let csv_first = std::fs::read(dir.path().join("phase_points.csv")).unwrap();
    let record_first = std::fs::read(dir.path().join("record.json")).unwrap();

    let out = scan("1.1", "0.2,0.45,0.6", "0.5");
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 points computed, 3 reused"));
    assert_eq!(csv_first, std::fs::read(dir.path().join("phase_points.csv")).unwrap());
    assert_eq!(record_first, std::fs::read(dir.path().join("record.json")).unwrap());

    // extending the grid only computes the new point
    let out = scan("1.1,1.5", "0.2", "0.5");
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 points computed, 1 reused"));
    let log = std::fs::read_to_string(dir.path().join("scan.log")).unwrap();
    assert_eq!(log.lines().count(), 8);
}
