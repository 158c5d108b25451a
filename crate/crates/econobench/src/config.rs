//! Run configuration: the TOML file schema and its validation.
//!
//! ```toml
//! session_dir = "runs/demo"
//! baseline = "data/human_baseline.sample.json"
//! seed = 42
//! n_valid = 50                  # valid samples per (agent, game)
//! games = ["dictator", "bomb_risk"]   # omit for all eight roles
//! r_values = [1.0, 0.5]
//! b_grid_step = 0.02
//! prompt_dir = "templates"      # omit to use the built-in prompts
//! charts = false                # also emit SVG histograms on analyze
//!
//! [game_params]                 # optional overrides, defaults compiled in
//! endowment = 100
//! trust_multiplier = 3.0
//! pd_payoffs = [200, 300, 100, 0]   # R, T, P, S
//!
//! [[agents]]
//! id = "fair-softmax"
//! kind = "softmax_logit"        # best_response | softmax_logit |
//!                               # point_mass | uniform_random | remote
//! b = 0.5
//! r = 0.5
//!
//! [[agents]]
//! id = "some-chat-model"
//! kind = "remote"
//! base_url = "https://api.example.com/v1/chat/completions"
//! model = "some-chat-model-v1"
//! api_key_env = "EXAMPLE_API_KEY"
//! temperature = 1.0             # omit for the provider default
//! max_in_flight = 4
//! timeout_secs = 60
//! retry_limit = 5
//! ```
//!
//! Agent ids may use letters, digits, `.`, `_` and `-`; `human` is reserved
//! for the baseline. Secrets travel only through environment variables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentKind;
use crate::analysis::UtilityParams;
use crate::connector::{sha256_hex, EndpointConfig};
use crate::games::{Action, GameError, GameId, GameParams, GameSpec, PdPayoffs};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("unknown game `{0}`")]
    UnknownGame(String),
    #[error("agent `{id}`: {message}")]
    Agent { id: String, message: String },
    #[error("duplicate agent id `{0}`")]
    DuplicateAgent(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Per-game parameter overrides; anything omitted keeps the compiled-in
/// default. `endowment` applies to the money-splitting games; Public Goods
/// has its own endowment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameParamsOverrides {
    pub endowment: Option<f64>,
    pub public_goods_endowment: Option<f64>,
    pub trust_multiplier: Option<f64>,
    pub trust_investment: Option<f64>,
    pub public_goods_players: Option<u32>,
    pub public_goods_multiplier: Option<f64>,
    pub bomb_boxes: Option<i64>,
    /// `[reward, temptation, punishment, sucker]`.
    pub pd_payoffs: Option<[f64; 4]>,
}

impl GameParamsOverrides {
    pub fn resolve(&self, game_id: GameId) -> GameParams {
        let mut p = GameParams::defaults_for(game_id);
        if game_id == GameId::PublicGoods {
            if let Some(e) = self.public_goods_endowment {
                p.endowment = e;
            }
        } else if let Some(e) = self.endowment {
            p.endowment = e;
        }
        if let Some(v) = self.trust_multiplier {
            p.trust_multiplier = v;
        }
        if let Some(v) = self.trust_investment {
            p.trust_investment = v;
        }
        if let Some(v) = self.public_goods_players {
            p.public_goods_players = v;
        }
        if let Some(v) = self.public_goods_multiplier {
            p.public_goods_multiplier = v;
        }
        if let Some(v) = self.bomb_boxes {
            p.bomb_boxes = v;
        }
        if let Some([r, t, pu, s]) = self.pd_payoffs {
            p.pd_payoffs = PdPayoffs {
                reward: r,
                temptation: t,
                punishment: pu,
                sucker: s,
            };
        }
        p
    }

    /// Validated specs for the requested games.
    pub fn specs(&self, games: &[GameId]) -> Result<BTreeMap<GameId, GameSpec>, GameError> {
        games
            .iter()
            .map(|&g| Ok((g, GameSpec::with_params(g, self.resolve(g))?)))
            .collect()
    }
}

/// One agent in the roster: a scripted reference agent or a remote endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AgentEntry {
    Scripted {
        id: String,
        kind: AgentKind,
        /// Optional fixed seed; otherwise derived from the run seed.
        seed: Option<u64>,
    },
    Remote {
        id: String,
        endpoint: EndpointConfig,
    },
}

impl AgentEntry {
    pub fn id(&self) -> &str {
        match self {
            AgentEntry::Scripted { id, .. } | AgentEntry::Remote { id, .. } => id,
        }
    }
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub session_dir: PathBuf,
    pub baseline: Option<PathBuf>,
    pub seed: u64,
    pub n_valid: usize,
    pub games: Vec<GameId>,
    pub r_values: Vec<f64>,
    pub b_grid_step: f64,
    pub prompt_dir: Option<PathBuf>,
    pub charts: bool,
    pub game_params: GameParamsOverrides,
    pub agents: Vec<AgentEntry>,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub session_dir: Option<PathBuf>,
    pub baseline: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n_valid: Option<usize>,
    pub games: Option<Vec<GameId>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: RawConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })?;
        raw.resolve()
    }

    pub fn apply(&mut self, overrides: Overrides) {
        if let Some(v) = overrides.session_dir {
            self.session_dir = v;
        }
        if let Some(v) = overrides.baseline {
            self.baseline = Some(v);
        }
        if let Some(v) = overrides.seed {
            self.seed = v;
        }
        if let Some(v) = overrides.n_valid {
            self.n_valid = v;
        }
        if let Some(v) = overrides.games {
            self.games = v;
        }
    }

    /// Hash of the resolved configuration, embedded in every output file.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        sha256_hex(canonical.as_bytes())
    }

    /// Validated specs for the configured games.
    pub fn specs(&self) -> Result<BTreeMap<GameId, GameSpec>, GameError> {
        self.game_params.specs(&self.games)
    }

    pub fn b_grid(&self) -> Vec<f64> {
        crate::analysis::default_b_grid(self.b_grid_step)
    }
}

pub fn parse_game_list(keys: &[String]) -> Result<Vec<GameId>, ConfigError> {
    let mut games = Vec::with_capacity(keys.len());
    for key in keys {
        let game = GameId::parse_key(key).ok_or_else(|| ConfigError::UnknownGame(key.clone()))?;
        if !games.contains(&game) {
            games.push(game);
        }
    }
    if games.is_empty() {
        return Err(ConfigError::Invalid("empty game list".into()));
    }
    Ok(games)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    session_dir: PathBuf,
    baseline: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_n_valid")]
    n_valid: usize,
    games: Option<Vec<String>>,
    #[serde(default = "default_r_values")]
    r_values: Vec<f64>,
    #[serde(default = "default_b_grid_step")]
    b_grid_step: f64,
    prompt_dir: Option<PathBuf>,
    #[serde(default)]
    charts: bool,
    #[serde(default)]
    game_params: GameParamsOverrides,
    #[serde(default)]
    agents: Vec<RawAgent>,
}

fn default_n_valid() -> usize {
    50
}

fn default_r_values() -> Vec<f64> {
    vec![1.0, 0.5]
}

fn default_b_grid_step() -> f64 {
    0.02
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    id: String,
    kind: String,
    // Scripted fields.
    b: Option<f64>,
    r: Option<f64>,
    action: Option<String>,
    seed: Option<u64>,
    // Remote fields.
    base_url: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
    temperature: Option<f64>,
    max_in_flight: Option<usize>,
    timeout_secs: Option<u64>,
    retry_limit: Option<usize>,
}

impl RawConfig {
    fn resolve(self) -> Result<RunConfig, ConfigError> {
        let games = match &self.games {
            Some(keys) => parse_game_list(keys)?,
            None => GameId::ALL.to_vec(),
        };
        if self.n_valid == 0 {
            return Err(ConfigError::Invalid("n_valid must be at least 1".into()));
        }
        if self.r_values.is_empty() || self.r_values.iter().any(|r| !(*r > 0.0)) {
            return Err(ConfigError::Invalid(
                "r_values must be a non-empty list of positive exponents".into(),
            ));
        }
        if !(self.b_grid_step > 0.0 && self.b_grid_step <= 1.0) {
            return Err(ConfigError::Invalid(
                "b_grid_step must lie in (0, 1]".into(),
            ));
        }
        let mut agents = Vec::with_capacity(self.agents.len());
        for raw in self.agents {
            let entry = raw.resolve()?;
            if agents.iter().any(|a: &AgentEntry| a.id() == entry.id()) {
                return Err(ConfigError::DuplicateAgent(entry.id().to_string()));
            }
            agents.push(entry);
        }
        let config = RunConfig {
            session_dir: self.session_dir,
            baseline: self.baseline,
            seed: self.seed,
            n_valid: self.n_valid,
            games,
            r_values: self.r_values,
            b_grid_step: self.b_grid_step,
            prompt_dir: self.prompt_dir,
            charts: self.charts,
            game_params: self.game_params,
            agents,
        };
        // Surface bad game parameters at load time.
        config.specs()?;
        Ok(config)
    }
}

impl RawAgent {
    fn resolve(self) -> Result<AgentEntry, ConfigError> {
        let id = self.id.clone();
        let fail = |message: String| ConfigError::Agent {
            id: id.clone(),
            message,
        };
        if id.is_empty()
            || !id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        {
            return Err(fail(
                "id must be non-empty and use only letters, digits, '.', '_' or '-'".into(),
            ));
        }
        if id == "human" {
            return Err(fail("`human` is reserved for the baseline".into()));
        }

        let utility = |raw: &RawAgent| -> Result<UtilityParams, ConfigError> {
            let b = raw.b.ok_or_else(|| fail("missing weight `b`".into()))?;
            let r = raw.r.ok_or_else(|| fail("missing exponent `r`".into()))?;
            UtilityParams::new(b, r).map_err(|e| fail(e.to_string()))
        };

        let kind = match self.kind.as_str() {
            "best_response" => AgentKind::BestResponse(utility(&self)?),
            "softmax_logit" => AgentKind::SoftmaxLogit(utility(&self)?),
            "point_mass" => {
                let text = self
                    .action
                    .as_deref()
                    .ok_or_else(|| fail("missing `action`".into()))?;
                let action: Action = Action::parse_str(text)
                    .ok_or_else(|| fail(format!("unparseable action `{text}`")))?;
                AgentKind::PointMass(action)
            }
            "uniform_random" => AgentKind::UniformRandom,
            "remote" => {
                let endpoint = EndpointConfig {
                    base_url: self
                        .base_url
                        .clone()
                        .ok_or_else(|| fail("missing `base_url`".into()))?,
                    model_name: self
                        .model
                        .clone()
                        .ok_or_else(|| fail("missing `model`".into()))?,
                    api_key_env: self
                        .api_key_env
                        .clone()
                        .ok_or_else(|| fail("missing `api_key_env`".into()))?,
                    temperature: self.temperature,
                    max_in_flight: self.max_in_flight.unwrap_or(4).max(1),
                    per_request_timeout_secs: self.timeout_secs.unwrap_or(60),
                    retry_limit: self.retry_limit.unwrap_or(5).max(1),
                };
                return Ok(AgentEntry::Remote { id, endpoint });
            }
            other => return Err(fail(format!("unknown kind `{other}`"))),
        };
        Ok(AgentEntry::Scripted {
            id,
            kind,
            seed: self.seed,
        })
    }
}
