//! End-to-end runs of the `econobench` binary.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_econobench"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let baseline = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/human_baseline.sample.json")
        .canonicalize()
        .unwrap();
    let config = format!(
        r#"
session_dir = "{session}"
baseline = "{baseline}"
seed = 11
n_valid = 12

[[agents]]
id = "fair"
kind = "best_response"
b = 0.5
r = 0.5

[[agents]]
id = "coin"
kind = "uniform_random"
"#,
        session = dir.join("session").display(),
        baseline = baseline.display(),
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    path
}

#[test]
fn collect_analyze_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());

    let collect = bin().args(["collect", "--config"]).arg(&config).output().unwrap();
    assert!(
        collect.status.success(),
        "collect failed: {}",
        String::from_utf8_lossy(&collect.stderr)
    );
    assert!(tmp.path().join("session/fair/dictator.jsonl").exists());
    assert!(tmp.path().join("session/distributions.json").exists());

    // Resume is a no-op.
    let stderr = String::from_utf8_lossy(&collect.stderr).to_string();
    assert!(stderr.contains("collected 12 valid"), "{stderr}");
    let again = bin().args(["collect", "--config"]).arg(&config).output().unwrap();
    let stderr = String::from_utf8_lossy(&again.stderr);
    assert!(again.status.success());
    assert!(stderr.contains("already complete"), "{stderr}");

    let analyze = bin().args(["analyze", "--config"]).arg(&config).output().unwrap();
    assert!(
        analyze.status.success(),
        "analyze failed: {}",
        String::from_utf8_lossy(&analyze.stderr)
    );
    assert!(tmp.path().join("session/reports/turing.csv").exists());
    assert!(tmp.path().join("session/reports/wasserstein.csv").exists());

    let report = bin().args(["report", "--config"]).arg(&config).output().unwrap();
    assert!(report.status.success());
    let stdout = String::from_utf8_lossy(&report.stdout);
    assert!(stdout.contains("# Behavioral games benchmark report"), "{stdout}");
    assert!(stdout.contains("| fair |"), "{stdout}");
    assert!(tmp.path().join("session/reports/report.md").exists());

    // Re-running report is byte-identical.
    let report2 = bin().args(["report", "--config"]).arg(&config).output().unwrap();
    assert_eq!(report.stdout, report2.stdout);
}

#[test]
fn game_subset_flag_limits_the_session() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());
    let out = bin()
        .args(["collect", "--config"])
        .arg(&config)
        .args(["--games", "dictator,bomb_risk", "--n-valid", "4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fair = tmp.path().join("session/fair");
    let files: Vec<String> = std::fs::read_dir(&fair)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(files.len(), 2, "{files:?}");
    assert!(files.contains(&"dictator.jsonl".to_string()));
    assert!(files.contains(&"bomb_risk.jsonl".to_string()));
}

#[test]
fn errors_are_reported_with_context() {
    let out = bin()
        .args(["collect", "--config", "/nonexistent/run.toml"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/nonexistent/run.toml"), "{stderr}");

    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());
    let out = bin()
        .args(["collect", "--config"])
        .arg(&config)
        .args(["--games", "chess"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("chess"), "{stderr}");

    // Analyzing an empty session names the missing piece.
    let out = bin()
        .args(["analyze", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("collect"), "{stderr}");
}
