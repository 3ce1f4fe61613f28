use std::fs;
use std::process::Command;

use serde_json::Value;

fn shilov(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_shilov")).args(args).output().expect("run shilov");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let (code, _, err) = shilov(&["structure", "--no-such-flag"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn tube_domain_is_a_usage_error() {
    let (code, _, err) = shilov(&["structure", "--r", "1", "--b", "0"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn cs_report_has_three_agreeing_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cs.json");
    let (code, out, err) = shilov(&["poisson", "cs", "--r", "1", "--b", "1", "--s-re", "2", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}{err}");
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let rep = &v["report"];
    for key in ["cs_gk", "cs_fatou", "cs_direct"] {
        let re = rep[key]["re"].as_f64().unwrap();
        assert!((re - 1.0).abs() < 1e-3, "{key} = {re}");
    }
    assert!(rep["max_pairwise_rel_err"].as_f64().unwrap() < 1e-3);
    assert_eq!(v["config"]["seed"], 7);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("cs.json.manifest.json")).unwrap()).unwrap();
    assert!(manifest["wall_time_s"].as_f64().is_some());
}

#[test]
fn inadmissible_cs_exits_with_usage_code() {
    let (code, _, err) = shilov(&["poisson", "cs", "--s-re", "-1"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn spectrum_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &str| vec!["ktypes", "spectrum", "--s-re", "3", "--t-stop", "2", "--max-degree", "2", "--out", p].into_iter().map(String::from).collect::<Vec<_>>();
    let run = |p: &std::path::Path| {
        let v = args(p.to_str().unwrap());
        let v: Vec<&str> = v.iter().map(|s| s.as_str()).collect();
        let (code, out, err) = shilov(&v);
        assert_eq!(code, 0, "{out}{err}");
    };
    run(&a);
    run(&b);
    let (ta, tb) = (fs::read_to_string(&a).unwrap(), fs::read_to_string(&b).unwrap());
    // the config line records the output path, which differs
    let strip = |t: &str| t.lines().filter(|l| !l.starts_with("# config")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&ta), strip(&tb));
    let mut lines = ta.lines();
    assert!(lines.next().unwrap().starts_with("# shilov "));
    assert!(lines.next().unwrap().starts_with("# config: {"));
    assert_eq!(lines.next().unwrap(), "# seed: 7");
    assert_eq!(lines.next().unwrap(), "p,q,t,phi_re,phi_im");
    // 6 K-types with p + q <= 2, 5 t values
    assert_eq!(lines.count(), 30);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "r = 1\nb = 2\nseed = 11\n[tolerances]\nkernel_form = 1e-8\n").unwrap();
    let out = dir.path().join("k.json");
    let (code, o, e) = shilov(&["poisson", "kernel", "--config", cfg.to_str().unwrap(), "--seed", "12", "--samples", "50", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{o}{e}");
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["config"]["b"], 2);
    assert_eq!(v["config"]["seed"], 12);
    assert_eq!(v["config"]["tolerances"]["kernel_form"], 1e-8);
    assert_eq!(v["report"]["samples"], 50);
}

#[test]
fn fatou_profile_columns() {
    let (code, out, err) = shilov(&["fatou", "profile", "--nodes", "2", "--level", "6", "--t-stop", "1", "--s-re", "2.5"]);
    assert_eq!(code, 0, "{err}");
    let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "node_index,t,re,im");
    // the summary line follows the CSV on stdout
    assert_eq!(rows.iter().filter(|l| l.split(',').count() == 4).count(), 1 + 2 * 3);
}

#[test]
fn suite_subset_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = shilov(&["suite", "--only", "1,3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.contains("PASS"));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("suite.json")).unwrap()).unwrap();
    assert_eq!(v["report"]["criteria"].as_array().unwrap().len(), 2);
    assert!(v["report"]["all_passed"].as_bool().unwrap());
    assert!(dir.path().join("suite.manifest.json").exists());
}
