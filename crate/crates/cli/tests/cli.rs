//! End-to-end checks of the binary: exit codes, output files, config files.

use std::process::Command;

fn plateau() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plateau"))
}

#[test]
fn bad_flags_exit_with_configuration_error() {
    let out = plateau().args(["run", "--method", "warp"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = plateau()
        .args(["run", "--benchmark", "ho"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "missing method must fail");

    let out = plateau()
        .args(["scan", "--benchmark", "lv", "--grid", "5:0:3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "empty grid must fail");
}

#[test]
fn help_exits_cleanly() {
    let out = plateau().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("run"));
    assert!(text.contains("compare"));
    assert!(text.contains("scan"));
    assert!(text.contains("selftest"));
}

#[test]
fn run_writes_outputs_and_reports() {
    let dir = std::env::temp_dir().join(format!("plateau-cli-{}", std::process::id()));
    let out = plateau()
        .args([
            "run",
            "--benchmark",
            "ho",
            "--method",
            "dfbbo",
            "--n-steps",
            "16",
            "--budget",
            "40",
            "--seed",
            "3",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("harmonic-oscillator dfbbo"),
        "stdout: {stdout}"
    );
    let record_path = dir.join("harmonic-oscillator_dfbbo_s3_record.json");
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&record_path).unwrap()).unwrap();
    assert_eq!(record["benchmark"], "harmonic-oscillator");
    assert_eq!(record["n_steps"], 16);
    assert!(record["metadata"]["budget"].is_number());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = std::env::temp_dir().join(format!("plateau-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("config.json");
    std::fs::write(
        &config_path,
        r#"{
            "benchmark": "harmonic-oscillator",
            "method": "dfbbo",
            "n_steps": 16,
            "budget": 30,
            "seed": 11
        }"#,
    )
    .unwrap();
    let out = plateau()
        .args(["run", "--config"])
        .arg(&config_path)
        .args(["--budget", "10"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("| 10 evaluations |"), "stdout: {stdout}");

    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"benchmark": "ho", "unknown_field": 3}"#).unwrap();
    let out = plateau().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "unknown config fields must fail");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn scan_emits_csv_and_svg() {
    let dir = std::env::temp_dir().join(format!("plateau-scan-{}", std::process::id()));
    let out = plateau()
        .args([
            "scan",
            "--benchmark",
            "lv",
            "--n-steps",
            "20",
            "--grid",
            "0.5:3.0:3",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("lotka-volterra_scan.csv")).unwrap();
    assert!(csv.starts_with("x,y,infeasibility"));
    assert_eq!(csv.lines().count(), 10); // header + 9 cells
    let svg = std::fs::read_to_string(dir.join("lotka-volterra_scan.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    std::fs::remove_dir_all(&dir).ok();
}
