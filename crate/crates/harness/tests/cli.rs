use std::fs;
use std::path::Path;

use lonelywalks_harness::cli::{run, EXIT_GATE, EXIT_OK, EXIT_VALIDATION};

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SMALL_EXTINCTION: &str = r#"
experiment = "extinction-curve"
replicas = 200
times = [0.0, 1.0, 2.0]
horizon = 2.0
[geometry]
sides = [32]
"#;

#[test]
fn negative_gamma_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[rule]\ngamma = -0.5\n");
    let out = dir.path().join("o");
    let code = run(["lonelywalks", "extinction-curve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_VALIDATION);
    assert!(!out.exists());
}

#[test]
fn unknown_experiment_and_describe() {
    assert_eq!(run(["lonelywalks", "no-such-thing"]), EXIT_VALIDATION);
    assert_eq!(run(["lonelywalks", "--describe", "extinction-curve"]), EXIT_OK);
    assert_eq!(run(["lonelywalks", "--describe", "nope"]), EXIT_VALIDATION);
    assert_eq!(run(["lonelywalks", "--list"]), EXIT_OK);
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_EXTINCTION);
    let mut bodies = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let code = run(["lonelywalks", "extinction-curve", "--config", &cfg, "--seed", "11", "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        bodies.push(fs::read(out.join("results.csv")).unwrap());
        let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["seed"], 11);
        assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    }
    assert_eq!(bodies[0], bodies[1]);
    let text = String::from_utf8(bodies[0].clone()).unwrap();
    assert!(text.starts_with("experiment,params,metric,value,ci_low,ci_high,replicas\n"));
    assert!(text.contains("vacancy@t=2"));
}

#[test]
fn check_mode_turns_failed_gates_into_exit_code() {
    // Two replicas cannot separate the intervals.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = \"extinction-curve\"\nreplicas = 100\ntimes = [0.0, 0.01, 0.02]\nhorizon = 0.02\n[geometry]\nsides = [16]\n",
    );
    let out = dir.path().join("o");
    let args = ["lonelywalks", "extinction-curve", "--config", &cfg, "--out", out.to_str().unwrap()];
    assert_eq!(run(args), EXIT_OK);
    let mut checked = args.to_vec();
    checked.push("--check");
    assert_eq!(run(checked), EXIT_GATE);
    let gates = fs::read_to_string(out.join("gates.csv")).unwrap();
    assert!(gates.contains("separated-intervals,false"));
}

#[test]
fn verify_generators_defaults_pass_and_write_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let code = run(["lonelywalks", "verify-generators", "--check", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let report = fs::read_to_string(out.join("generators.csv")).unwrap();
    assert!(report.starts_with("identity,kernel,d,L,cap,gamma,max_residual,pass\n"));
    assert!(!report.contains(",false"));
}

#[test]
fn json_summary_mirrors_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL_EXTINCTION}[output]\ndir = \"x\"\njson_summary = true\n"));
    let out = dir.path().join("j");
    assert_eq!(run(["lonelywalks", "extinction-curve", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_OK);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    let rows = summary["rows"].as_array().unwrap();
    let csv_lines = fs::read_to_string(out.join("results.csv")).unwrap().lines().count();
    assert_eq!(rows.len() + 1, csv_lines);
}
