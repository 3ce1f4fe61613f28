//! Acceptance battery: criteria 1-11 from an in-process `suite` run, criterion 12 from a second
//! run of the built binary with the same configuration and output path.

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_default()
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let run_dir = tmp.path().join("run");
    let first = tmp.path().join("first");
    let args = ["shilov", "suite", "--seed", "7", "--r", "1", "--b", "1", "--out", run_dir.to_str().unwrap()];

    let code = shilov::cli::run(args);
    let report: Value = serde_json::from_slice(&read(&run_dir, "suite.json")).expect("suite.json");
    fs::rename(&run_dir, &first).expect("move first run");

    let mut failed = 0;
    for c in report["report"]["criteria"].as_array().expect("criteria") {
        let id = c["id"].as_u64().unwrap_or(0);
        if id == 12 {
            continue;
        }
        let ok = c["passed"].as_bool().unwrap_or(false);
        failed += usize::from(!ok);
        println!("{} criterion {id:>2} ({}): {}", if ok { "PASS" } else { "FAIL" }, c["name"].as_str().unwrap_or(""), c["summary"].as_str().unwrap_or(""));
    }

    let status = Command::new(env!("CARGO_BIN_EXE_shilov")).args(&args[1..]).output().expect("run shilov binary");
    let files = ["suite.json", "suite.csv"];
    let identical: Vec<bool> = files.iter().map(|f| { let a = read(&first, f); !a.is_empty() && a == read(&run_dir, f) }).collect();
    let inner = report["report"]["criteria"]
        .as_array()
        .and_then(|cs| cs.iter().find(|c| c["id"] == 12))
        .and_then(|c| c["passed"].as_bool())
        .unwrap_or(false);
    let ok12 = identical.iter().all(|&b| b) && inner;
    failed += usize::from(!ok12);
    println!(
        "{} criterion 12 (determinism): suite.json identical = {}, suite.csv identical = {}, in-run repeat = {inner}",
        if ok12 { "PASS" } else { "FAIL" },
        identical[0],
        identical[1]
    );
    println!("suite exit codes: in-process {code}, binary {}", status.status.code().unwrap_or(-1));

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 12 acceptance criteria passed");
}
