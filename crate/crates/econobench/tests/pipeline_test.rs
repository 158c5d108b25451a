//! End-to-end sessions with scripted agents: collect, resume, analyze,
//! report, and the determinism guarantees across re-runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use econobench::agents::AgentKind;
use econobench::analysis::UtilityParams;
use econobench::config::{AgentEntry, GameParamsOverrides, RunConfig};
use econobench::games::GameId;
use econobench::pipeline::{run_analyze, run_collect, PairOutcome, PipelineError};
use econobench::report::run_report;
use econobench::store::SessionStore;

fn baseline_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/human_baseline.sample.json")
}

fn scripted(id: &str, kind: AgentKind) -> AgentEntry {
    AgentEntry::Scripted {
        id: id.into(),
        kind,
        seed: None,
    }
}

fn test_config(session_dir: PathBuf) -> RunConfig {
    RunConfig {
        session_dir,
        baseline: Some(baseline_path()),
        seed: 42,
        n_valid: 30,
        games: GameId::ALL.to_vec(),
        r_values: vec![1.0, 0.5],
        b_grid_step: 0.02,
        prompt_dir: None,
        charts: false,
        game_params: GameParamsOverrides::default(),
        agents: vec![
            scripted(
                "fair-br",
                AgentKind::BestResponse(UtilityParams::new(0.5, 0.5).unwrap()),
            ),
            scripted(
                "soft",
                AgentKind::SoftmaxLogit(UtilityParams::new(0.6, 1.0).unwrap()),
            ),
            scripted("rand", AgentKind::UniformRandom),
        ],
    }
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return out;
    }
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.clone(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn scripted_session_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let config = test_config(tmp.path().join("session"));
    let store = SessionStore::new(&config.session_dir);

    // Collect: every pair fresh.
    let summary = run_collect(&config, |_| {}).unwrap();
    assert_eq!(summary.pairs.len(), 3 * 8);
    assert!(summary
        .pairs
        .iter()
        .all(|p| matches!(p.outcome, PairOutcome::Collected { valid: 30, .. })));
    for agent in ["fair-br", "soft", "rand"] {
        let files = std::fs::read_dir(config.session_dir.join(agent))
            .unwrap()
            .count();
        assert_eq!(files, 8, "one transcript per game for {agent}");
    }

    // Resume: nothing collected twice, transcripts byte-identical.
    let before = snapshot(&config.session_dir);
    let resumed = run_collect(&config, |_| {}).unwrap();
    assert!(resumed
        .pairs
        .iter()
        .all(|p| p.outcome == PairOutcome::Skipped));
    assert_eq!(before, snapshot(&config.session_dir));

    // Distributions round-trip from disk.
    let (file, agents) = store.load_distributions().unwrap();
    assert_eq!(file.seed, 42);
    assert_eq!(file.config_hash, config.hash());
    assert_eq!(agents.len(), 3);
    assert!(agents["fair-br"][&GameId::Dictator].n_samples() == 30);

    // Analyze, twice: identical bytes.
    let analysis = run_analyze(&config, |_| {}).unwrap();
    assert!(analysis.warnings.is_empty(), "{:?}", analysis.warnings);
    let reports = store.reports_dir();
    let first = snapshot(&reports);
    run_analyze(&config, |_| {}).unwrap();
    assert_eq!(first, snapshot(&reports));
    for name in [
        "turing.csv",
        "wasserstein.csv",
        "preference_curves_r1.csv",
        "preference_curves_r0.5.csv",
        "logit_fits.csv",
        "inconsistency.csv",
    ] {
        assert!(reports.join(name).exists(), "{name} missing");
    }
    let meta = std::fs::read_to_string(reports.join("turing.csv")).unwrap();
    assert!(meta.starts_with(&format!(
        "# config_hash={} seed=42\n",
        config.hash()
    )));

    // The baseline against itself wins half the rounds everywhere.
    for row in read_csv(&reports.join("turing.csv")) {
        if row[0] == "human" {
            let rate: f64 = row[2].parse().unwrap();
            assert!((rate - 0.5).abs() <= 1e-12, "human turing row {row:?}");
        }
    }

    // A best-response agent with b = 0.5 looks like b = 0.5 where the game
    // identifies it.
    let logit = read_csv(&reports.join("logit_fits.csv"));
    let fair_dictator_half = logit
        .iter()
        .find(|r| r[0] == "fair-br" && r[1] == "dictator" && r[2] == "0.5")
        .expect("fit row present");
    let b_hat: f64 = fair_dictator_half[3].parse().unwrap();
    assert!((b_hat - 0.5).abs() <= 0.02, "b_hat = {b_hat}");

    // The Wasserstein matrix is symmetric with a zero diagonal and includes
    // the human baseline.
    let wasserstein = read_csv(&reports.join("wasserstein.csv"));
    assert_eq!(wasserstein.len(), 4);
    assert!(wasserstein.iter().any(|r| r[0] == "human"));
    for (i, row) in wasserstein.iter().enumerate() {
        assert_eq!(row[i + 1], "0");
    }

    // Report: deterministic markdown from the bundle.
    let text = run_report(&config).unwrap();
    assert_eq!(text, run_report(&config).unwrap());
    assert!(reports.join("report.md").exists());
    assert!(text.contains("fair-br"));
    assert!(text.contains("| human |"));
    assert!(text.contains("Turing test win rates"));
}

#[test]
fn analyze_without_collect_or_baseline_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = test_config(tmp.path().join("session"));

    let err = run_analyze(&config, |_| {}).unwrap_err();
    assert!(matches!(err, PipelineError::MissingRecords { .. }), "{err}");

    config.baseline = None;
    let err = run_analyze(&config, |_| {}).unwrap_err();
    assert!(matches!(err, PipelineError::BaselineRequired), "{err}");

    let err = run_report(&config).unwrap_err();
    assert!(matches!(err, PipelineError::MissingBundle(_)), "{err}");
}

#[test]
fn single_game_session_omits_inconsistency_with_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = test_config(tmp.path().join("session"));
    config.games = vec![GameId::Dictator];
    config.n_valid = 10;

    run_collect(&config, |_| {}).unwrap();
    let summary = run_analyze(&config, |_| {}).unwrap();
    assert!(
        summary.warnings.iter().any(|w| w.contains("inconsistency")),
        "{:?}",
        summary.warnings
    );
    let reports = SessionStore::new(&config.session_dir).reports_dir();
    assert!(!reports.join("inconsistency.csv").exists());
    assert!(reports.join("logit_fits.csv").exists());
}

#[test]
fn charts_are_emitted_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = test_config(tmp.path().join("session"));
    config.games = vec![GameId::PrisonersDilemma];
    config.n_valid = 5;
    config.charts = true;

    run_collect(&config, |_| {}).unwrap();
    run_analyze(&config, |_| {}).unwrap();
    let reports = SessionStore::new(&config.session_dir).reports_dir();
    let svg = reports.join("histograms/human/prisoners_dilemma.svg");
    assert!(svg.exists());
    let content = std::fs::read_to_string(svg).unwrap();
    assert!(content.contains(&config.hash()));
}

#[test]
fn partial_sessions_are_reported_and_analyzable() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = test_config(tmp.path().join("session"));
    config.games = vec![GameId::Dictator, GameId::PublicGoods];
    config.n_valid = 8;
    run_collect(&config, |_| {}).unwrap();

    // Pretend the session was configured for more samples afterwards.
    config.n_valid = 20;
    let summary = run_analyze(&config, |_| {}).unwrap();
    assert!(
        summary.warnings.iter().any(|w| w.contains("partial")),
        "{:?}",
        summary.warnings
    );

    // Resuming tops the transcripts up without duplicating the old records.
    let store = SessionStore::new(&config.session_dir);
    let before = store.load_records("rand", GameId::Dictator).unwrap();
    run_collect(&config, |_| {}).unwrap();
    let after = store.load_records("rand", GameId::Dictator).unwrap();
    assert_eq!(after.len(), 20);
    assert_eq!(&after[..8], &before[..]);
    let indices: Vec<u64> = after.iter().map(|r| r.attempt_index).collect();
    assert_eq!(indices, (0..20).collect::<Vec<u64>>());
}

#[test]
fn baseline_missing_a_requested_game_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = test_config(tmp.path().join("session"));
    config.games = vec![GameId::TrustBanker];
    config.n_valid = 5;

    // A baseline covering everything except the banker.
    let slim = tmp.path().join("slim_baseline.json");
    let full = std::fs::read_to_string(baseline_path()).unwrap();
    let mut parsed: serde_json::Value = serde_json::from_str(&full).unwrap();
    parsed.as_object_mut().unwrap().remove("trust_banker");
    std::fs::write(&slim, serde_json::to_string(&parsed).unwrap()).unwrap();
    config.baseline = Some(slim);

    run_collect(&config, |_| {}).unwrap();
    let err = run_analyze(&config, |_| {}).unwrap_err();
    assert!(err.to_string().contains("Trust - Banker"), "{err}");
}
