//! Histogram representation of behavior, human baseline ingestion, and
//! session persistence.
//!
//! A behavior distribution is a normalized histogram over a game's action
//! space. Constructors enforce the probability invariants once; nothing
//! downstream re-normalizes. Distributions built from raw counts keep the
//! counts so files round-trip without floating-point drift.
//!
//! File schemas (JSON):
//!
//! ```json
//! {
//!   "dictator":           { "counts": { "0": 12, "50": 35, "100": 14 } },
//!   "prisoners_dilemma":  { "probs": { "cooperate": 0.45, "defect": 0.55 },
//!                           "n_samples": 200 }
//! }
//! ```
//!
//! Action keys are decimal integers for the numeric games and
//! `"cooperate"`/`"defect"` for the Prisoner's Dilemma. Counts are preferred
//! over probs; probs must sum to one within 1e-9.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connector::CollectionRecord;
use crate::games::{Action, ActionSpace, GameId, Move};

const PROB_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("distribution has no support")]
    EmptySupport,
    #[error("support and probability lists differ in length")]
    LengthMismatch,
    #[error("{field}: probabilities sum to {sum}, expected 1")]
    ProbSum { field: String, sum: f64 },
    #[error("{field}: {message}")]
    Schema { field: String, message: String },
    #[error("unknown game id `{0}`")]
    UnknownGame(String),
    #[error("no valid records to build a distribution from")]
    NoValidRecords,
    #[error("records mix games {0} and {1}")]
    MixedGames(GameId, GameId),
    #[error("cannot normalize {0}: action range is a single point")]
    DegenerateRange(GameId),
    #[error("baseline is missing {0}")]
    MissingBaseline(GameId),
    #[error("malformed record file {path}: {message}")]
    MalformedRecords { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// A normalized histogram of decisions over one game's action space.
///
/// Invariants, enforced at construction: support non-empty, ascending and
/// duplicate-free; probabilities non-negative and summing to one within 1e-9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    game_id: GameId,
    support: Vec<Action>,
    probs: Vec<f64>,
    counts: Option<Vec<u64>>,
    n_samples: u64,
}

impl ActionDistribution {
    /// Build from raw counts. Duplicate actions are merged; zero-count
    /// entries are dropped.
    pub fn from_counts(
        game_id: GameId,
        counts: impl IntoIterator<Item = (Action, u64)>,
    ) -> Result<ActionDistribution, StoreError> {
        let mut merged: BTreeMap<Action, u64> = BTreeMap::new();
        for (action, count) in counts {
            *merged.entry(action).or_insert(0) += count;
        }
        merged.retain(|_, c| *c > 0);
        if merged.is_empty() {
            return Err(StoreError::EmptySupport);
        }
        let total: u64 = merged.values().sum();
        let support: Vec<Action> = merged.keys().copied().collect();
        let counts: Vec<u64> = merged.values().copied().collect();
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(ActionDistribution {
            game_id,
            support,
            probs,
            counts: Some(counts),
            n_samples: total,
        })
    }

    /// Build from explicit probabilities (they must sum to one within 1e-9).
    /// `n_samples` records how many observations the histogram summarizes.
    pub fn from_probs(
        game_id: GameId,
        pairs: impl IntoIterator<Item = (Action, f64)>,
        n_samples: u64,
    ) -> Result<ActionDistribution, StoreError> {
        let mut merged: BTreeMap<Action, f64> = BTreeMap::new();
        for (action, p) in pairs {
            if !p.is_finite() || p < 0.0 {
                return Err(StoreError::Schema {
                    field: format!("{}.probs.{}", game_id.key(), action_key(action)),
                    message: format!("probability {p} is not in [0, 1]"),
                });
            }
            *merged.entry(action).or_insert(0.0) += p;
        }
        merged.retain(|_, p| *p > 0.0);
        if merged.is_empty() {
            return Err(StoreError::EmptySupport);
        }
        let sum: f64 = merged.values().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(StoreError::ProbSum {
                field: format!("{}.probs", game_id.key()),
                sum,
            });
        }
        Ok(ActionDistribution {
            game_id,
            support: merged.keys().copied().collect(),
            probs: merged.values().copied().collect(),
            counts: None,
            n_samples,
        })
    }

    /// All mass on a single action.
    pub fn point_mass(game_id: GameId, action: Action) -> ActionDistribution {
        ActionDistribution {
            game_id,
            support: vec![action],
            probs: vec![1.0],
            counts: Some(vec![1]),
            n_samples: 1,
        }
    }

    /// Empirical frequencies over the valid records of one game. Invalid
    /// records are excluded from both the frequencies and `n_samples`.
    pub fn from_records(records: &[CollectionRecord]) -> Result<ActionDistribution, StoreError> {
        let mut game_id: Option<GameId> = None;
        let mut counts: BTreeMap<Action, u64> = BTreeMap::new();
        for record in records {
            match game_id {
                None => game_id = Some(record.game_id),
                Some(g) if g != record.game_id => {
                    return Err(StoreError::MixedGames(g, record.game_id))
                }
                _ => {}
            }
            if let Some(action) = record.parsed {
                *counts.entry(action).or_insert(0) += 1;
            }
        }
        let game_id = game_id.ok_or(StoreError::NoValidRecords)?;
        if counts.is_empty() {
            return Err(StoreError::NoValidRecords);
        }
        ActionDistribution::from_counts(game_id, counts)
    }

    pub fn game_id(&self) -> GameId {
        self.game_id
    }

    pub fn support(&self) -> &[Action] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    /// Probability of one action; zero when outside the support.
    pub fn prob(&self, action: Action) -> f64 {
        match self.support.binary_search(&action) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    /// Observation count of one action, if this histogram is count-backed.
    pub fn count(&self, action: Action) -> Option<u64> {
        let counts = self.counts.as_ref()?;
        match self.support.binary_search(&action) {
            Ok(i) => Some(counts[i]),
            Err(_) => Some(0),
        }
    }

    /// `(action, probability)` pairs in ascending action order.
    pub fn pairs(&self) -> impl Iterator<Item = (Action, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    /// Check that every supported action lies inside `space`.
    pub fn check_in_space(&self, space: &ActionSpace) -> Result<(), StoreError> {
        for &action in &self.support {
            if !space.contains(action) {
                return Err(StoreError::Schema {
                    field: format!("{}.counts.{}", self.game_id.key(), action_key(action)),
                    message: "action is outside the game's action space".into(),
                });
            }
        }
        Ok(())
    }

    fn to_entry(&self) -> DistEntry {
        match &self.counts {
            Some(counts) => DistEntry {
                counts: Some(
                    self.support
                        .iter()
                        .zip(counts)
                        .map(|(a, c)| (action_key(*a), *c))
                        .collect(),
                ),
                probs: None,
                n_samples: None,
            },
            None => DistEntry {
                counts: None,
                probs: Some(
                    self.support
                        .iter()
                        .zip(&self.probs)
                        .map(|(a, p)| (action_key(*a), *p))
                        .collect(),
                ),
                n_samples: Some(self.n_samples),
            },
        }
    }

    fn from_entry(game_id: GameId, entry: &DistEntry) -> Result<ActionDistribution, StoreError> {
        let field = |suffix: &str| format!("{}.{suffix}", game_id.key());
        match (&entry.counts, &entry.probs) {
            (Some(counts), None) => {
                let pairs = parse_action_keys(game_id, counts, "counts")?;
                ActionDistribution::from_counts(game_id, pairs)
            }
            (None, Some(probs)) => {
                let pairs = parse_action_keys(game_id, probs, "probs")?;
                let n = entry.n_samples.ok_or_else(|| StoreError::Schema {
                    field: field("n_samples"),
                    message: "required alongside probs".into(),
                })?;
                ActionDistribution::from_probs(game_id, pairs, n)
            }
            (Some(_), Some(_)) => Err(StoreError::Schema {
                field: field("counts"),
                message: "give either counts or probs, not both".into(),
            }),
            (None, None) => Err(StoreError::Schema {
                field: field("counts"),
                message: "entry has neither counts nor probs".into(),
            }),
        }
    }
}

/// The textual action key used in JSON files: the amount in decimal, or the
/// lowercase move name.
pub fn action_key(action: Action) -> String {
    match action {
        Action::Amount(a) => a.to_string(),
        Action::Move(Move::Cooperate) => "cooperate".into(),
        Action::Move(Move::Defect) => "defect".into(),
    }
}

fn parse_action_keys<V: Copy>(
    game_id: GameId,
    map: &BTreeMap<String, V>,
    section: &str,
) -> Result<Vec<(Action, V)>, StoreError> {
    map.iter()
        .map(|(key, value)| {
            let action = Action::parse_str(key).ok_or_else(|| StoreError::Schema {
                field: format!("{}.{section}.{key}", game_id.key()),
                message: "not an integer amount or cooperate/defect".into(),
            })?;
            Ok((action, *value))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct DistEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    counts: Option<BTreeMap<String, u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probs: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_samples: Option<u64>,
}

/// A distribution mapped onto the unit interval, for cross-game comparison.
///
/// Amounts map to `(a - lo) / (hi - lo)` over the game's full action range;
/// cooperate maps to 1 and defect to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDistribution {
    pub game_id: GameId,
    /// Ascending points in `[0, 1]`.
    pub points: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Map a distribution's support onto `[0, 1]` using the bounds of `space`.
/// Probabilities are untouched. Fails if the range is a single point.
pub fn normalize_support(
    dist: &ActionDistribution,
    space: &ActionSpace,
) -> Result<NormalizedDistribution, StoreError> {
    let (lo, hi) = space.bounds();
    if hi <= lo {
        return Err(StoreError::DegenerateRange(dist.game_id));
    }
    let points = dist
        .support
        .iter()
        .map(|a| (a.embedding() - lo) / (hi - lo))
        .collect();
    Ok(NormalizedDistribution {
        game_id: dist.game_id,
        points,
        probs: dist.probs.clone(),
    })
}

/// Per-game human behavior distributions loaded from a baseline file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HumanBaseline {
    games: BTreeMap<GameId, ActionDistribution>,
}

impl HumanBaseline {
    pub fn new(games: impl IntoIterator<Item = ActionDistribution>) -> HumanBaseline {
        HumanBaseline {
            games: games.into_iter().map(|d| (d.game_id(), d)).collect(),
        }
    }

    /// Load and validate a baseline JSON file (schema in the module docs).
    pub fn load(path: &Path) -> Result<HumanBaseline, StoreError> {
        let text = fs::read_to_string(path)?;
        let raw: BTreeMap<String, DistEntry> =
            serde_json::from_str(&text).map_err(|source| StoreError::Json {
                path: path.to_path_buf(),
                source,
            })?;
        let mut games = BTreeMap::new();
        for (key, entry) in &raw {
            let game_id =
                GameId::parse_key(key).ok_or_else(|| StoreError::UnknownGame(key.clone()))?;
            games.insert(game_id, ActionDistribution::from_entry(game_id, entry)?);
        }
        Ok(HumanBaseline { games })
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let raw: BTreeMap<String, DistEntry> = self
            .games
            .iter()
            .map(|(game_id, dist)| (game_id.key().to_string(), dist.to_entry()))
            .collect();
        let mut text = serde_json::to_string_pretty(&raw).expect("baseline serializes");
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    /// The distribution for one game, or a `MissingBaseline` error.
    pub fn distribution(&self, game_id: GameId) -> Result<&ActionDistribution, StoreError> {
        self.games
            .get(&game_id)
            .ok_or(StoreError::MissingBaseline(game_id))
    }

    pub fn contains(&self, game_id: GameId) -> bool {
        self.games.contains_key(&game_id)
    }

    pub fn games(&self) -> impl Iterator<Item = (&GameId, &ActionDistribution)> {
        self.games.iter()
    }
}

/// On-disk layout of one collection/analysis session:
///
/// ```text
/// <root>/<agent_id>/<game_id>.jsonl   raw transcripts, one record per line
/// <root>/distributions.json           histograms derived from the records
/// <root>/reports/                     analysis outputs
/// ```
#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

/// Contents of `distributions.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct DistributionsFile {
    pub config_hash: String,
    pub seed: u64,
    agents: BTreeMap<String, BTreeMap<String, DistEntry>>,
}

impl SessionStore {
    pub fn new(root: impl Into<PathBuf>) -> SessionStore {
        SessionStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn records_path(&self, agent_id: &str, game_id: GameId) -> PathBuf {
        self.root.join(agent_id).join(format!("{}.jsonl", game_id.key()))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn distributions_path(&self) -> PathBuf {
        self.root.join("distributions.json")
    }

    /// Load the records of one (agent, game) pair. A missing file reads as
    /// empty; a malformed line is an error naming the file.
    pub fn load_records(
        &self,
        agent_id: &str,
        game_id: GameId,
    ) -> Result<Vec<CollectionRecord>, StoreError> {
        let path = self.records_path(agent_id, game_id);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let file = fs::File::open(&path)?;
        let mut records = Vec::new();
        for (line_no, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: CollectionRecord =
                serde_json::from_str(&line).map_err(|e| StoreError::MalformedRecords {
                    path: path.clone(),
                    message: format!("line {}: {e}", line_no + 1),
                })?;
            records.push(record);
        }
        Ok(records)
    }

    /// Open an append-mode writer for one (agent, game) transcript.
    pub fn record_writer(
        &self,
        agent_id: &str,
        game_id: GameId,
    ) -> Result<RecordWriter, StoreError> {
        let path = self.records_path(agent_id, game_id);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = fs::OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(RecordWriter {
            out: BufWriter::new(file),
        })
    }

    pub fn write_distributions(
        &self,
        config_hash: &str,
        seed: u64,
        agents: &BTreeMap<String, BTreeMap<GameId, ActionDistribution>>,
    ) -> Result<(), StoreError> {
        let file = DistributionsFile {
            config_hash: config_hash.to_string(),
            seed,
            agents: agents
                .iter()
                .map(|(agent, games)| {
                    let entries = games
                        .iter()
                        .map(|(game_id, dist)| (game_id.key().to_string(), dist.to_entry()))
                        .collect();
                    (agent.clone(), entries)
                })
                .collect(),
        };
        fs::create_dir_all(&self.root)?;
        let mut text = serde_json::to_string_pretty(&file).expect("distributions serialize");
        text.push('\n');
        fs::write(self.distributions_path(), text)?;
        Ok(())
    }

    pub fn load_distributions(
        &self,
    ) -> Result<(DistributionsFile, BTreeMap<String, BTreeMap<GameId, ActionDistribution>>), StoreError>
    {
        let path = self.distributions_path();
        let text = fs::read_to_string(&path)?;
        let file: DistributionsFile =
            serde_json::from_str(&text).map_err(|source| StoreError::Json {
                path: path.clone(),
                source,
            })?;
        let mut agents = BTreeMap::new();
        for (agent, entries) in &file.agents {
            let mut games = BTreeMap::new();
            for (key, entry) in entries {
                let game_id =
                    GameId::parse_key(key).ok_or_else(|| StoreError::UnknownGame(key.clone()))?;
                games.insert(game_id, ActionDistribution::from_entry(game_id, entry)?);
            }
            agents.insert(agent.clone(), games);
        }
        Ok((file, agents))
    }
}

/// Serialized appender for collection records.
pub struct RecordWriter {
    out: BufWriter<fs::File>,
}

impl RecordWriter {
    pub fn append(&mut self, record: &CollectionRecord) -> std::io::Result<()> {
        let line = serde_json::to_string(record).expect("record serializes");
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

/// Render a histogram as `action,probability` CSV lines (no metadata header).
pub fn histogram_csv(dist: &ActionDistribution) -> String {
    let mut out = String::from("action,probability\n");
    for (action, prob) in dist.pairs() {
        out.push_str(&format!("{},{}\n", action_key(action), prob));
    }
    out
}
