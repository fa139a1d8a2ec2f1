use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn maglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maglab"))
        .args(args)
        .output()
        .expect("spawn maglab")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("json output")
}

fn read_json(path: &Path) -> Value {
    json(&std::fs::read(path).unwrap())
}

#[test]
fn verify_flat_is_strong() {
    let out = maglab(&["verify", "catalog:FLAT"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["report"]["classification"], "strong");
    assert_eq!(v["report"]["residuals"]["dual"], 0.0);
}

#[test]
fn verify_exit_code_follows_requirement() {
    let out = maglab(&["verify", "--system", "catalog:HELIX"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out.stdout)["report"]["failing_check"], "strong_maximality_margin");
    let out = maglab(&["verify", "catalog:HELIX", "--require", "semi-strong"]);
    assert_eq!(out.status.code(), Some(0));
    let out = maglab(&["verify", "catalog:HELIX", "--rescale"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn sweep_reproduces_action_formula() {
    let out = maglab(&["sweep", "catalog:HELIX", "--rescale", "--r", "0.5,1,2"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rd = csv::Reader::from_reader(out.stdout.as_slice());
    let header: Vec<String> = rd.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(
        header,
        ["r", "kappa_r", "predicted_action", "quadrature_action", "closure_residual", "mixing_weight"]
    );
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    let pi = std::f64::consts::PI;
    for (row, expected) in rows.iter().zip([-pi, 0.0, 2.0 * pi]) {
        let action: f64 = row[3].parse().unwrap();
        assert!((action - expected).abs() <= 1e-7 * (1.0 + expected.abs()), "{action} vs {expected}");
    }
    assert_eq!(&rows[0][5], "0.5");
    assert_eq!(&rows[1][5], "");
}

#[test]
fn measure_mixing_weight() {
    let out = maglab(&["measure", "catalog:HELIX", "--rescale", "--r", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    let m = &v["report"][0];
    assert!((m["A"].as_f64().unwrap() - 0.5).abs() <= 1e-9);
    assert!(m["nu_action"].as_f64().unwrap().abs() <= 1e-12);
    assert_eq!(v["seed"], 1);
}

#[test]
fn build_output_reloads_with_same_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = maglab(&["build", "catalog:WAVY", "--kind", "rescale-metric", "--out", out_dir]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("build.json"));
    let system_file = report["report"]["output"].as_str().unwrap().to_string();
    let recorded = &report["report"]["verification"]["residuals"];

    let again = tempfile::tempdir().unwrap();
    let out = maglab(&["verify", &system_file, "--require", "semi-strong", "--out", again.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let reloaded = read_json(&again.path().join("verify.json"));
    let residuals = &reloaded["report"]["residuals"];
    for (name, value) in recorded.as_object().unwrap() {
        let a = value.as_f64().unwrap();
        let b = residuals[name].as_f64().unwrap();
        assert!((a - b).abs() <= 1e-12, "{name}: {a} vs {b}");
    }
}

#[test]
fn construct_directive_in_document() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{
        "name": "TUBE", "m": 3, "T": 6.283185307179586, "R": 0.5,
        "alpha": ["1", "0", "x2"],
        "flags": {"gamma_nullhomologous": true, "gamma_contractible": true},
        "exterior_alpha_bound": 1.0,
        "construct": "metric_from_alpha"
    }"#;
    let path = dir.path().join("tube.json");
    std::fs::write(&path, doc).unwrap();
    let out = maglab(&["build", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("build.json"));
    assert!(report["report"]["provenance"].as_str().is_some());
    assert!(report["report"]["certified_radius"].as_f64().unwrap() > 0.0);
}

#[test]
fn asymmetric_metric_reports_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{
        "name": "BAD", "m": 3, "T": 6.283185307179586, "R": 0.5,
        "metric": {"1,2": "0.1", "2,1": "0.2"},
        "alpha": ["1", "0", "0"]
    }"#;
    let path = dir.path().join("bad.json");
    std::fs::write(&path, doc).unwrap();
    let out = maglab(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = json(&out.stderr);
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["path"].as_str().unwrap().starts_with("metric."));
}

#[test]
fn outputs_are_deterministic() {
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = maglab(&[
                "sweep", "catalog:TWIST", "--rescale", "--r", "0.25,1.5", "--out", dir.path().to_str().unwrap(),
            ]);
            assert_eq!(out.status.code(), Some(0));
            std::fs::read(dir.path().join("sweep.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);

    let a = maglab(&["mane", "catalog:TWIST", "--rescale", "--audit-samples", "500", "--seed", "7"]);
    let b = maglab(&["mane", "catalog:TWIST", "--rescale", "--audit-samples", "500", "--seed", "7", "--sequential"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn integrate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = maglab(&[
        "integrate", "catalog:TWIST", "--p", "0,0.1,0", "--v", "1,0,0.05", "--duration", "1", "--h", "0.01",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rd = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().len(), 8);
    assert_eq!(rd.records().count(), 101);
    let summary = read_json(&dir.path().join("integrate.json"));
    assert!(summary["report"]["energy_drift"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn catalog_lists_and_prints() {
    let out = maglab(&["catalog"]);
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = json(&out.stdout)["report"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(names, ["FLAT", "HELIX", "TWIST", "WAVY"]);
    let out = maglab(&["catalog", "helix"]);
    let doc = json(&out.stdout);
    assert_eq!(doc["alpha"][2], "x2");
}

#[test]
fn raw_semi_strong_system_cannot_sweep() {
    let out = maglab(&["sweep", "catalog:HELIX"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"]["kind"], "mane");
}
