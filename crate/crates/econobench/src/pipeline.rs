//! Session orchestration: the collect and analyze phases behind the CLI.
//!
//! Collection is idempotent: pairs that already hold enough valid records
//! are skipped, and an interrupted session resumes by appending to the
//! transcripts. Analysis is a deterministic function of the transcripts,
//! the baseline, and the configured seed — re-running it produces
//! byte-identical outputs. Every output file embeds the config hash and
//! seed on its first line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::agents::{parse_action, AgentError, AgentKind, AgentProfile, ScriptedAgent};
use crate::analysis::{
    average_curve, dissimilarity_matrix, fit_logit_b, inconsistency_score, preference_curve,
    turing_test, AnalysisError, PartnerModel, PlayerDistributions, PreferenceCurve, TuringMethod,
};
use crate::chart::bar_chart_svg;
use crate::config::{AgentEntry, ConfigError, RunConfig};
use crate::connector::{
    collect, load_template, render_prompt, sha256_hex, CollectOptions, CollectionRecord,
    ConnectorError, HttpEndpoint,
};
use crate::games::{GameId, GameSpec};
use crate::store::{
    action_key, histogram_csv, ActionDistribution, HumanBaseline, SessionStore, StoreError,
};

/// Reserved player name for the human baseline in analysis outputs.
pub const HUMAN_PLAYER: &str = "human";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Game(#[from] crate::games::GameError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Connector(#[from] ConnectorError),
    #[error("analysis needs a baseline; set `baseline` in the config or pass --baseline")]
    BaselineRequired,
    #[error("no records for agent {agent} in {game}; run `collect` first")]
    MissingRecords { agent: String, game: GameId },
    #[error("missing report bundle file {0}; run `analyze` first")]
    MissingBundle(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What happened to one (agent, game) pair during collection.
#[derive(Debug, Clone, PartialEq)]
pub enum PairOutcome {
    /// Freshly collected: how many valid/invalid records were appended.
    Collected { valid: usize, invalid: usize },
    /// Already complete; nothing was done.
    Skipped,
    /// Collection failed; the session holds a partial transcript.
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct PairStatus {
    pub agent_id: String,
    pub game_id: GameId,
    pub outcome: PairOutcome,
}

#[derive(Debug, Default)]
pub struct CollectSummary {
    pub pairs: Vec<PairStatus>,
    pub warnings: Vec<String>,
}

impl CollectSummary {
    pub fn failures(&self) -> impl Iterator<Item = &PairStatus> {
        self.pairs
            .iter()
            .filter(|p| matches!(p.outcome, PairOutcome::Failed(_)))
    }
}

#[derive(Debug, Default)]
pub struct AnalyzeSummary {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Run the collection phase for every configured (agent, game) pair.
pub fn run_collect(
    config: &RunConfig,
    mut progress: impl FnMut(&str),
) -> Result<CollectSummary, PipelineError> {
    let specs = config.specs()?;
    let store = SessionStore::new(&config.session_dir);
    let baseline = match &config.baseline {
        Some(path) => Some(HumanBaseline::load(path)?),
        None => None,
    };

    // Fail fast on endpoint misconfiguration (e.g. a missing API key).
    let mut endpoints: BTreeMap<String, HttpEndpoint> = BTreeMap::new();
    for entry in &config.agents {
        if let AgentEntry::Remote { id, endpoint } = entry {
            endpoints.insert(id.clone(), HttpEndpoint::new(endpoint.clone())?);
        }
    }

    let mut summary = CollectSummary::default();
    for entry in &config.agents {
        for &game_id in &config.games {
            let spec = &specs[&game_id];
            let status = collect_pair(
                config,
                &store,
                baseline.as_ref(),
                &endpoints,
                entry,
                spec,
            );
            let status = match status {
                Ok(outcome) => outcome,
                Err(e) => PairOutcome::Failed(e.to_string()),
            };
            progress(&format!(
                "{} / {}: {}",
                entry.id(),
                game_id.key(),
                describe(&status)
            ));
            summary.pairs.push(PairStatus {
                agent_id: entry.id().to_string(),
                game_id,
                outcome: status,
            });
        }
    }

    write_distributions(config, &store, &mut summary)?;
    Ok(summary)
}

fn describe(outcome: &PairOutcome) -> String {
    match outcome {
        PairOutcome::Collected { valid, invalid } => {
            format!("collected {valid} valid, {invalid} invalid")
        }
        PairOutcome::Skipped => "already complete".into(),
        PairOutcome::Failed(e) => format!("FAILED: {e}"),
    }
}

fn collect_pair(
    config: &RunConfig,
    store: &SessionStore,
    baseline: Option<&HumanBaseline>,
    endpoints: &BTreeMap<String, HttpEndpoint>,
    entry: &AgentEntry,
    spec: &GameSpec,
) -> Result<PairOutcome, PipelineError> {
    let game_id = spec.game_id();
    let agent_id = entry.id();
    let existing = store.load_records(agent_id, game_id)?;
    let existing_valid = existing.iter().filter(|r| r.parsed.is_some()).count();
    if existing_valid >= config.n_valid {
        return Ok(PairOutcome::Skipped);
    }
    let need = config.n_valid - existing_valid;
    let start_index = existing.len() as u64;

    let template = load_template(game_id, config.prompt_dir.as_deref())?;
    let prompt = render_prompt(&template, spec)?;
    let mut writer = store.record_writer(agent_id, game_id)?;

    match entry {
        AgentEntry::Remote { id, endpoint } => {
            let mut opts = CollectOptions::for_endpoint(id.clone(), need, endpoint);
            opts.start_index = start_index;
            let http = &endpoints[id];
            match collect(http, spec, &prompt, &opts, |r| writer.append(r)) {
                Ok(records) => {
                    let invalid = records.iter().filter(|r| r.parsed.is_none()).count();
                    Ok(PairOutcome::Collected {
                        valid: need,
                        invalid,
                    })
                }
                Err(e) => Ok(PairOutcome::Failed(e.to_string())),
            }
        }
        AgentEntry::Scripted { id, kind, seed } => {
            let partner = match kind {
                AgentKind::BestResponse(_) | AgentKind::SoftmaxLogit(_) => {
                    scripted_partner(spec, baseline)?
                }
                _ => PartnerModel::Trivial,
            };
            let mut agent = ScriptedAgent::new(AgentProfile {
                agent_id: id.clone(),
                kind: kind.clone(),
                seed: derive_seed(config.seed, *seed, id, game_id),
            });
            let prompt_hash = sha256_hex(prompt.as_bytes());
            for i in 0..need {
                let action = agent.decide(spec, &partner)?;
                let raw_reply = action.to_string();
                let record = CollectionRecord {
                    agent_id: id.clone(),
                    game_id,
                    attempt_index: start_index + i as u64,
                    parsed: parse_action(&raw_reply, spec),
                    raw_reply,
                    timestamp_ms: now_ms(),
                    prompt_hash: prompt_hash.clone(),
                };
                writer.append(&record)?;
            }
            Ok(PairOutcome::Collected {
                valid: need,
                invalid: 0,
            })
        }
    }
}

fn scripted_partner(
    spec: &GameSpec,
    baseline: Option<&HumanBaseline>,
) -> Result<PartnerModel, PipelineError> {
    match spec.game_id() {
        GameId::Dictator | GameId::TrustBanker | GameId::BombRisk => Ok(PartnerModel::Trivial),
        game => {
            let baseline = baseline.ok_or(PipelineError::BaselineRequired)?;
            let _ = game;
            Ok(PartnerModel::for_game(spec, baseline)?)
        }
    }
}

fn write_distributions(
    config: &RunConfig,
    store: &SessionStore,
    summary: &mut CollectSummary,
) -> Result<(), PipelineError> {
    let mut agents: BTreeMap<String, BTreeMap<GameId, ActionDistribution>> = BTreeMap::new();
    for entry in &config.agents {
        let mut games = BTreeMap::new();
        for &game_id in &config.games {
            let records = store.load_records(entry.id(), game_id)?;
            if records.iter().any(|r| r.parsed.is_some()) {
                games.insert(game_id, ActionDistribution::from_records(&records)?);
            } else {
                summary.warnings.push(format!(
                    "{} / {}: no valid records yet",
                    entry.id(),
                    game_id.key()
                ));
            }
        }
        if !games.is_empty() {
            agents.insert(entry.id().to_string(), games);
        }
    }
    store.write_distributions(&config.hash(), config.seed, &agents)?;
    Ok(())
}

/// Derive the per-(agent, game) seed from the run seed, an optional per-agent
/// seed, and the pair identity. Stable across runs and platforms.
pub fn derive_seed(
    global_seed: u64,
    agent_seed: Option<u64>,
    agent_id: &str,
    game_id: GameId,
) -> u64 {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    match agent_seed {
        Some(s) => {
            hasher.update([1]);
            hasher.update(s.to_le_bytes());
        }
        None => hasher.update([0]),
    }
    hasher.update(agent_id.as_bytes());
    hasher.update([0]);
    hasher.update(game_id.key().as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is long enough"))
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
        .as_millis() as u64
}

/// Run every analysis against the human baseline and write the report
/// bundle under `<session>/reports/`.
pub fn run_analyze(
    config: &RunConfig,
    mut progress: impl FnMut(&str),
) -> Result<AnalyzeSummary, PipelineError> {
    let specs = config.specs()?;
    let store = SessionStore::new(&config.session_dir);
    let baseline_path = config
        .baseline
        .as_ref()
        .ok_or(PipelineError::BaselineRequired)?;
    let baseline = HumanBaseline::load(baseline_path)?;
    for &game_id in &config.games {
        let dist = baseline.distribution(game_id)?;
        dist.check_in_space(specs[&game_id].action_space())?;
    }

    let mut summary = AnalyzeSummary::default();

    // Players: the baseline first, then agents in id order.
    let mut players: Vec<PlayerDistributions> = Vec::new();
    let mut human = BTreeMap::new();
    for &game_id in &config.games {
        human.insert(game_id, baseline.distribution(game_id)?.clone());
    }
    players.push(PlayerDistributions {
        name: HUMAN_PLAYER.into(),
        per_game: human,
    });
    let mut agent_ids: Vec<String> = config.agents.iter().map(|a| a.id().to_string()).collect();
    agent_ids.sort();
    for agent_id in &agent_ids {
        let mut per_game = BTreeMap::new();
        for &game_id in &config.games {
            let records = store.load_records(agent_id, game_id)?;
            let valid = records.iter().filter(|r| r.parsed.is_some()).count();
            if valid == 0 {
                return Err(PipelineError::MissingRecords {
                    agent: agent_id.clone(),
                    game: game_id,
                });
            }
            if valid < config.n_valid {
                summary.warnings.push(format!(
                    "{agent_id} / {}: partial session ({valid} of {} valid records)",
                    game_id.key(),
                    config.n_valid
                ));
            }
            per_game.insert(game_id, ActionDistribution::from_records(&records)?);
        }
        players.push(PlayerDistributions {
            name: agent_id.clone(),
            per_game,
        });
    }

    let reports = store.reports_dir();
    std::fs::create_dir_all(&reports)?;
    let meta = format!("# config_hash={} seed={}\n", config.hash(), config.seed);
    let partner_models: BTreeMap<GameId, PartnerModel> = config
        .games
        .iter()
        .map(|&g| Ok((g, PartnerModel::for_game(&specs[&g], &baseline)?)))
        .collect::<Result<_, AnalysisError>>()?;

    // Turing test: every player against the human baseline.
    progress("turing test");
    let mut turing = String::from("player,game,win_rate,method,n_rounds,std_err\n");
    for player in &players {
        let mut rates = Vec::new();
        for &game_id in &config.games {
            let result = turing_test(
                &player.per_game[&game_id],
                baseline.distribution(game_id)?,
                TuringMethod::Exact,
            )?;
            rates.push(result.win_rate);
            writeln!(
                turing,
                "{},{},{},exact,,",
                player.name,
                game_id.key(),
                result.win_rate
            )
            .expect("string write");
        }
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        writeln!(turing, "{},average,{},exact,,", player.name, mean).expect("string write");
    }
    write_report_file(&mut summary, reports.join("turing.csv"), &meta, &turing)?;

    // Pairwise Wasserstein dissimilarity.
    progress("dissimilarity matrix");
    let matrix = dissimilarity_matrix(&players, &specs, &config.games)?;
    let mut wasserstein = String::from("player");
    for name in &matrix.players {
        write!(wasserstein, ",{name}").expect("string write");
    }
    wasserstein.push('\n');
    for (i, name) in matrix.players.iter().enumerate() {
        write!(wasserstein, "{name}").expect("string write");
        for j in 0..matrix.players.len() {
            write!(wasserstein, ",{}", matrix.get(i, j)).expect("string write");
        }
        wasserstein.push('\n');
    }
    write_report_file(
        &mut summary,
        reports.join("wasserstein.csv"),
        &meta,
        &wasserstein,
    )?;

    // Preference curves, logit fits, and inconsistency per exponent.
    let curve_games: Vec<GameId> = config
        .games
        .iter()
        .copied()
        .filter(|&g| g != GameId::BombRisk)
        .collect();
    if curve_games.is_empty() {
        summary
            .warnings
            .push("no games with partner payoffs; preference analyses skipped".into());
    }
    let b_grid = config.b_grid();
    let mut logit_csv =
        String::from("player,game,r,b_hat,std_err,ci_lo,ci_hi,log_likelihood\n");
    let mut inconsistency_csv = String::from("player,r,score\n");
    for &r in &config.r_values {
        if curve_games.is_empty() {
            break;
        }
        progress(&format!("preference analyses at r = {r}"));
        let mut curves_csv = String::from("player,game,b,mse\n");
        for player in &players {
            let mut curves: Vec<PreferenceCurve> = Vec::new();
            for &game_id in &curve_games {
                let spec = &specs[&game_id];
                let partner = &partner_models[&game_id];
                let observed = &player.per_game[&game_id];
                let curve = preference_curve(spec, observed, partner, r, &b_grid)?;
                for (b, mse) in curve.b_grid.iter().zip(&curve.mse) {
                    writeln!(curves_csv, "{},{},{b},{mse}", player.name, game_id.key())
                        .expect("string write");
                }
                let fit = fit_logit_b(spec, observed, partner, r)?;
                writeln!(
                    logit_csv,
                    "{},{},{r},{},{},{},{},{}",
                    player.name,
                    game_id.key(),
                    fit.b_hat,
                    fit.std_err,
                    fit.ci_95.0,
                    fit.ci_95.1,
                    fit.log_likelihood
                )
                .expect("string write");
                curves.push(curve);
            }
            let avg = average_curve(&curves)?;
            for (b, mse) in avg.b_grid.iter().zip(&avg.mse) {
                writeln!(curves_csv, "{},average,{b},{mse}", player.name).expect("string write");
            }
            if curves.len() >= 2 {
                let score = inconsistency_score(&curves)?;
                writeln!(inconsistency_csv, "{},{r},{score}", player.name).expect("string write");
            }
        }
        write_report_file(
            &mut summary,
            reports.join(format!("preference_curves_r{r}.csv")),
            &meta,
            &curves_csv,
        )?;
    }
    if !curve_games.is_empty() {
        write_report_file(
            &mut summary,
            reports.join("logit_fits.csv"),
            &meta,
            &logit_csv,
        )?;
        if curve_games.len() >= 2 {
            write_report_file(
                &mut summary,
                reports.join("inconsistency.csv"),
                &meta,
                &inconsistency_csv,
            )?;
        } else {
            summary.warnings.push(
                "only one game with a preference curve; inconsistency omitted".into(),
            );
        }
    }

    // Histograms (and optional charts).
    progress("histograms");
    for player in &players {
        let dir = reports.join("histograms").join(&player.name);
        std::fs::create_dir_all(&dir)?;
        for &game_id in &config.games {
            let dist = &player.per_game[&game_id];
            let csv = histogram_csv(dist);
            write_report_file(
                &mut summary,
                dir.join(format!("{}.csv", game_id.key())),
                &meta,
                &csv,
            )?;
            if config.charts {
                let labels: Vec<String> =
                    dist.support().iter().map(|&a| action_key(a)).collect();
                let svg = bar_chart_svg(
                    &format!("{} - {}", player.name, game_id.label()),
                    &labels,
                    dist.probs(),
                    meta.trim_start_matches("# ").trim(),
                );
                let path = dir.join(format!("{}.svg", game_id.key()));
                std::fs::write(&path, svg)?;
                summary.files.push(path);
            }
        }
    }

    Ok(summary)
}

fn write_report_file(
    summary: &mut AnalyzeSummary,
    path: PathBuf,
    meta: &str,
    body: &str,
) -> Result<(), PipelineError> {
    std::fs::write(&path, format!("{meta}{body}"))?;
    summary.files.push(path);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_separate_agents_and_games() {
        let a = derive_seed(1, None, "alpha", GameId::Dictator);
        let b = derive_seed(1, None, "alpha", GameId::BombRisk);
        let c = derive_seed(1, None, "beta", GameId::Dictator);
        let d = derive_seed(2, None, "alpha", GameId::Dictator);
        let e = derive_seed(1, Some(9), "alpha", GameId::Dictator);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(a, e);
        assert_eq!(a, derive_seed(1, None, "alpha", GameId::Dictator));
    }
}
