//! Collection of behavior distributions from chat-completion endpoints:
//! prompt rendering, the request loop, validity filtering, and raw
//! transcript records.
//!
//! Every sample is an independent single-turn conversation; no state is
//! shared between requests. Raw replies are recorded whether or not they
//! parse, so a session can be re-analyzed offline with an improved parser.
//!
//! The wire shape is the JSON chat-completion form shared (up to headers) by
//! the major vendors: `{"model", "messages": [{"role", "content"}],
//! "temperature"?}` posted over HTTPS, answered with a `choices` list. The
//! API key is read from an environment variable named in the config and is
//! never written to output files.

use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::parse_action;
use crate::games::{Action, GameId, GameSpec};

/// How to reach one chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Full URL of the chat-completions route.
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    /// Sampling temperature; `None` keeps the provider default so sampling
    /// stays enabled.
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout_secs")]
    pub per_request_timeout_secs: u64,
    /// Attempts allowed per valid sample before giving up.
    #[serde(default = "default_retry_limit")]
    pub retry_limit: usize,
}

fn default_max_in_flight() -> usize {
    4
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_retry_limit() -> usize {
    5
}

/// One raw reply plus its parsed, validated action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionRecord {
    pub agent_id: String,
    pub game_id: GameId,
    /// Position in the (agent, game) transcript; append-only.
    pub attempt_index: u64,
    pub raw_reply: String,
    /// `None` marks an invalid reply; it stays in the transcript but is
    /// excluded from distributions.
    pub parsed: Option<Action>,
    pub timestamp_ms: u64,
    /// SHA-256 of the exact rendered prompt this reply answered.
    pub prompt_hash: String,
}

#[derive(Debug, Error)]
pub enum ConnectorError {
    #[error("environment variable {variable} is not set; it should hold the API key for {model}")]
    MissingApiKey { variable: String, model: String },
    #[error("template references unknown placeholder {{{0}}}")]
    UnknownPlaceholder(String),
    #[error("cannot read template {path}: {source}")]
    TemplateRead {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("failed to build HTTP client: {0}")]
    Client(String),
}

/// A failure of one request.
#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed chat response: {0}")]
    Malformed(String),
}

impl EndpointError {
    /// Rate limits and server errors are worth retrying; transport and auth
    /// failures surface immediately.
    pub fn retryable(&self) -> bool {
        matches!(
            self,
            EndpointError::Status { status, .. } if *status == 429 || (500..=599).contains(status)
        )
    }
}

/// Anything that can answer a single-turn prompt.
pub trait ChatEndpoint {
    fn complete(&self, prompt: &str) -> Result<String, EndpointError>;
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

/// Blocking HTTP client for one configured endpoint.
pub struct HttpEndpoint {
    config: EndpointConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpEndpoint {
    /// Build the client, reading the API key from the configured
    /// environment variable.
    pub fn new(config: EndpointConfig) -> Result<HttpEndpoint, ConnectorError> {
        let api_key =
            std::env::var(&config.api_key_env).map_err(|_| ConnectorError::MissingApiKey {
                variable: config.api_key_env.clone(),
                model: config.model_name.clone(),
            })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.per_request_timeout_secs))
            .build()
            .map_err(|e| ConnectorError::Client(e.to_string()))?;
        Ok(HttpEndpoint {
            config,
            api_key,
            client,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }
}

impl ChatEndpoint for HttpEndpoint {
    fn complete(&self, prompt: &str) -> Result<String, EndpointError> {
        let request = ChatRequest {
            model: &self.config.model_name,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: self.config.temperature,
        };
        let response = self
            .client
            .post(&self.config.base_url)
            .bearer_auth(&self.api_key)
            .json(&request)
            .send()
            .map_err(|e| EndpointError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 401 || status == 403 {
            return Err(EndpointError::Auth { status });
        }
        if !(200..300).contains(&status) {
            let body = response.text().unwrap_or_default();
            return Err(EndpointError::Status { status, body });
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| EndpointError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| EndpointError::Malformed("empty choices list".into()))
    }
}

/// Render a prompt template for a game: `{placeholder}` tokens are replaced
/// from the game's parameters; an unknown placeholder is an error.
///
/// Available placeholders: `{endowment}`, `{multiplier}` (the trust
/// multiplier in the trust games, the pot multiplier in Public Goods),
/// `{trust_multiplier}`, `{public_goods_multiplier}`, `{investment}`,
/// `{multiplied_investment}`, `{players}`, `{co_players}`, `{boxes}`,
/// `{pd_reward}`, `{pd_temptation}`, `{pd_punishment}`, `{pd_sucker}`.
pub fn render_prompt(template: &str, spec: &GameSpec) -> Result<String, ConnectorError> {
    let p = spec.params();
    let lookup = |name: &str| -> Option<String> {
        let value = match name {
            "endowment" => p.endowment,
            "multiplier" => match spec.game_id() {
                GameId::PublicGoods => p.public_goods_multiplier,
                GameId::TrustInvestor | GameId::TrustBanker => p.trust_multiplier,
                _ => return None,
            },
            "trust_multiplier" => p.trust_multiplier,
            "public_goods_multiplier" => p.public_goods_multiplier,
            "investment" => p.trust_investment,
            "multiplied_investment" => p.trust_multiplier * p.trust_investment,
            "players" => p.public_goods_players as f64,
            "co_players" => (p.public_goods_players - 1) as f64,
            "boxes" => p.bomb_boxes as f64,
            "pd_reward" => p.pd_payoffs.reward,
            "pd_temptation" => p.pd_payoffs.temptation,
            "pd_punishment" => p.pd_payoffs.punishment,
            "pd_sucker" => p.pd_payoffs.sucker,
            _ => return None,
        };
        Some(format!("{value}"))
    };

    let pattern = regex::Regex::new(r"\{([A-Za-z_]+)\}").expect("static pattern");
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    for captures in pattern.captures_iter(template) {
        let whole = captures.get(0).unwrap();
        let name = captures.get(1).unwrap().as_str();
        let value = lookup(name).ok_or_else(|| ConnectorError::UnknownPlaceholder(name.into()))?;
        out.push_str(&template[last..whole.start()]);
        out.push_str(&value);
        last = whole.end();
    }
    out.push_str(&template[last..]);
    Ok(out)
}

/// The built-in prompt template for a role.
pub fn default_template(game_id: GameId) -> &'static str {
    match game_id {
        GameId::Dictator => include_str!("../templates/dictator.txt"),
        GameId::UltimatumProposer => include_str!("../templates/ultimatum_proposer.txt"),
        GameId::UltimatumResponder => include_str!("../templates/ultimatum_responder.txt"),
        GameId::TrustInvestor => include_str!("../templates/trust_investor.txt"),
        GameId::TrustBanker => include_str!("../templates/trust_banker.txt"),
        GameId::PublicGoods => include_str!("../templates/public_goods.txt"),
        GameId::BombRisk => include_str!("../templates/bomb_risk.txt"),
        GameId::PrisonersDilemma => include_str!("../templates/prisoners_dilemma.txt"),
    }
}

/// Read `<dir>/<game_id>.txt`, or fall back to the built-in template when no
/// directory is configured.
pub fn load_template(game_id: GameId, dir: Option<&Path>) -> Result<String, ConnectorError> {
    match dir {
        Some(dir) => {
            let path = dir.join(format!("{}.txt", game_id.key()));
            std::fs::read_to_string(&path)
                .map_err(|source| ConnectorError::TemplateRead { path, source })
        }
        None => Ok(default_template(game_id).to_string()),
    }
}

/// Settings of one collection run.
#[derive(Debug, Clone)]
pub struct CollectOptions {
    pub agent_id: String,
    /// Valid samples to gather.
    pub n_valid: usize,
    pub max_in_flight: usize,
    /// Attempts allowed per valid sample.
    pub retry_limit: usize,
    /// First attempt index to assign (supports resuming a transcript).
    pub start_index: u64,
}

impl CollectOptions {
    pub fn new(agent_id: impl Into<String>, n_valid: usize) -> CollectOptions {
        CollectOptions {
            agent_id: agent_id.into(),
            n_valid,
            max_in_flight: default_max_in_flight(),
            retry_limit: default_retry_limit(),
            start_index: 0,
        }
    }

    pub fn for_endpoint(
        agent_id: impl Into<String>,
        n_valid: usize,
        config: &EndpointConfig,
    ) -> CollectOptions {
        CollectOptions {
            agent_id: agent_id.into(),
            n_valid,
            max_in_flight: config.max_in_flight,
            retry_limit: config.retry_limit,
            start_index: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum CollectError {
    #[error("{context}: {source}")]
    Endpoint {
        context: String,
        source: EndpointError,
        /// Records gathered before the failure.
        records: Vec<CollectionRecord>,
    },
    #[error("{context}: no valid reply within {retry_limit} attempts")]
    RetryExhausted {
        context: String,
        retry_limit: usize,
        records: Vec<CollectionRecord>,
    },
    #[error("failed to persist a record: {source}")]
    Persist {
        source: std::io::Error,
        records: Vec<CollectionRecord>,
    },
}

impl CollectError {
    /// The records gathered before the failure (the partial result).
    pub fn partial_records(&self) -> &[CollectionRecord] {
        match self {
            CollectError::Endpoint { records, .. }
            | CollectError::RetryExhausted { records, .. }
            | CollectError::Persist { records, .. } => records,
        }
    }
}

enum WorkerMessage {
    Reply {
        raw: String,
        parsed: Option<Action>,
    },
    Failed {
        slot: usize,
        error: EndpointError,
    },
    Exhausted {
        slot: usize,
    },
}

enum FailureKind {
    Endpoint { slot: usize, error: EndpointError },
    Exhausted { slot: usize },
    Persist(std::io::Error),
}

/// Gather `n_valid` valid samples from an endpoint, with bounded concurrency
/// and a per-sample retry budget.
///
/// Every reply — valid or not — becomes a record and is handed to `sink`
/// (serialized through this thread) before collection proceeds, so
/// transcripts survive a later failure. Returns all records on success;
/// if any single sample exhausts its retries or the endpoint fails, the
/// error carries the partial result.
pub fn collect<E, S>(
    endpoint: &E,
    spec: &GameSpec,
    prompt: &str,
    opts: &CollectOptions,
    mut sink: S,
) -> Result<Vec<CollectionRecord>, CollectError>
where
    E: ChatEndpoint + Sync + ?Sized,
    S: FnMut(&CollectionRecord) -> std::io::Result<()>,
{
    let max_in_flight = opts.max_in_flight.max(1);
    let retry_limit = opts.retry_limit.max(1);
    let prompt_hash = sha256_hex(prompt.as_bytes());

    let next_slot = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut records: Vec<CollectionRecord> = Vec::with_capacity(opts.n_valid);
    let mut failure: Option<FailureKind> = None;

    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<WorkerMessage>();
        for _ in 0..max_in_flight {
            let tx = tx.clone();
            let next_slot = &next_slot;
            let abort = &abort;
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    return;
                }
                let slot = next_slot.fetch_add(1, Ordering::Relaxed);
                if slot >= opts.n_valid {
                    return;
                }
                let mut satisfied = false;
                for _attempt in 0..retry_limit {
                    if abort.load(Ordering::Relaxed) {
                        return;
                    }
                    match endpoint.complete(prompt) {
                        Ok(raw) => {
                            let parsed = parse_action(&raw, spec);
                            let valid = parsed.is_some();
                            if tx.send(WorkerMessage::Reply { raw, parsed }).is_err() {
                                return;
                            }
                            if valid {
                                satisfied = true;
                                break;
                            }
                        }
                        Err(error) if error.retryable() => continue,
                        Err(error) => {
                            let _ = tx.send(WorkerMessage::Failed { slot, error });
                            return;
                        }
                    }
                }
                if !satisfied {
                    let _ = tx.send(WorkerMessage::Exhausted { slot });
                    return;
                }
            });
        }
        drop(tx);

        let mut next_index = opts.start_index;
        for message in rx {
            match message {
                WorkerMessage::Reply { raw, parsed } => {
                    let record = CollectionRecord {
                        agent_id: opts.agent_id.clone(),
                        game_id: spec.game_id(),
                        attempt_index: next_index,
                        raw_reply: raw,
                        parsed,
                        timestamp_ms: now_ms(),
                        prompt_hash: prompt_hash.clone(),
                    };
                    next_index += 1;
                    if failure.is_none() {
                        if let Err(e) = sink(&record) {
                            abort.store(true, Ordering::Relaxed);
                            failure = Some(FailureKind::Persist(e));
                        }
                    }
                    records.push(record);
                }
                WorkerMessage::Failed { slot, error } => {
                    abort.store(true, Ordering::Relaxed);
                    failure.get_or_insert(FailureKind::Endpoint { slot, error });
                }
                WorkerMessage::Exhausted { slot } => {
                    abort.store(true, Ordering::Relaxed);
                    failure.get_or_insert(FailureKind::Exhausted { slot });
                }
            }
        }
    });

    let context = |slot: usize| {
        format!(
            "agent {}, game {}, sample {}",
            opts.agent_id,
            spec.game_id().key(),
            slot
        )
    };
    match failure {
        None => Ok(records),
        Some(FailureKind::Endpoint { slot, error }) => Err(CollectError::Endpoint {
            context: context(slot),
            source: error,
            records,
        }),
        Some(FailureKind::Exhausted { slot }) => Err(CollectError::RetryExhausted {
            context: context(slot),
            retry_limit,
            records,
        }),
        Some(FailureKind::Persist(source)) => Err(CollectError::Persist { source, records }),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
        .as_millis() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    struct FixedReply(&'static str);

    impl ChatEndpoint for FixedReply {
        fn complete(&self, _prompt: &str) -> Result<String, EndpointError> {
            Ok(self.0.to_string())
        }
    }

    /// Alternates an unparseable reply with "$30", recording every prompt.
    struct Alternating {
        calls: AtomicUsize,
        prompts: Mutex<Vec<String>>,
    }

    impl Alternating {
        fn new() -> Alternating {
            Alternating {
                calls: AtomicUsize::new(0),
                prompts: Mutex::new(Vec::new()),
            }
        }
    }

    impl ChatEndpoint for Alternating {
        fn complete(&self, prompt: &str) -> Result<String, EndpointError> {
            self.prompts.lock().unwrap().push(prompt.to_string());
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n % 2 == 0 {
                Ok("respectfully, no".into())
            } else {
                Ok("I'll go with $30.".into())
            }
        }
    }

    struct AlwaysGibberish;

    impl ChatEndpoint for AlwaysGibberish {
        fn complete(&self, _prompt: &str) -> Result<String, EndpointError> {
            Ok("words words words".into())
        }
    }

    fn dictator() -> GameSpec {
        GameSpec::new(GameId::Dictator)
    }

    #[test]
    fn render_substitutes_parameters() {
        let spec = dictator();
        assert_eq!(
            render_prompt("split ${endowment}", &spec).unwrap(),
            "split $100"
        );
        let bomb = GameSpec::new(GameId::BombRisk);
        let rendered = render_prompt(default_template(GameId::BombRisk), &bomb).unwrap();
        assert!(rendered.contains("100"), "{rendered}");
        assert!(!rendered.contains('{'), "{rendered}");
    }

    #[test]
    fn unknown_placeholder_is_an_error() {
        let err = render_prompt("a {bogus} token", &dictator()).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn all_default_templates_render() {
        for game_id in GameId::ALL {
            let spec = GameSpec::new(game_id);
            let rendered = render_prompt(default_template(game_id), &spec).unwrap();
            assert!(!rendered.contains('{'), "{game_id}: {rendered}");
        }
    }

    #[test]
    fn point_endpoint_yields_a_point_mass() {
        let endpoint = FixedReply("I'll give $50.");
        let opts = CollectOptions::new("mock", 50);
        let records = collect(&endpoint, &dictator(), "p", &opts, |_| Ok(())).unwrap();
        assert_eq!(records.len(), 50);
        assert!(records
            .iter()
            .all(|r| r.parsed == Some(Action::Amount(50))));
        let dist = crate::store::ActionDistribution::from_records(&records).unwrap();
        assert_eq!(dist.prob(Action::Amount(50)), 1.0);
        assert_eq!(dist.n_samples(), 50);
    }

    #[test]
    fn invalid_replies_are_kept_and_retried() {
        let endpoint = Alternating::new();
        let mut opts = CollectOptions::new("mock", 10);
        opts.max_in_flight = 1; // deterministic alternation per slot
        let mut sunk = 0usize;
        let records = collect(&endpoint, &dictator(), "the prompt", &opts, |_| {
            sunk += 1;
            Ok(())
        })
        .unwrap();
        let valid = records.iter().filter(|r| r.parsed.is_some()).count();
        let invalid = records.iter().filter(|r| r.parsed.is_none()).count();
        assert_eq!((valid, invalid), (10, 10));
        assert_eq!(sunk, 20);
        // Attempt indices are the transcript line numbers.
        let indices: Vec<u64> = records.iter().map(|r| r.attempt_index).collect();
        assert_eq!(indices, (0..20).collect::<Vec<u64>>());
        // Independence: every request carried exactly the rendered prompt.
        let prompts = endpoint.prompts.lock().unwrap();
        assert!(prompts.iter().all(|p| p == "the prompt"));
    }

    #[test]
    fn parser_starvation_exhausts_retries() {
        let mut opts = CollectOptions::new("mock", 3);
        opts.retry_limit = 4;
        opts.max_in_flight = 1;
        let err = collect(&AlwaysGibberish, &dictator(), "p", &opts, |_| Ok(())).unwrap_err();
        match &err {
            CollectError::RetryExhausted {
                retry_limit,
                records,
                ..
            } => {
                assert_eq!(*retry_limit, 4);
                assert_eq!(records.len(), 4);
                assert!(records.iter().all(|r| r.parsed.is_none()));
            }
            other => panic!("expected retry exhaustion, got {other:?}"),
        }
        assert_eq!(err.partial_records().len(), 4);
    }

    #[test]
    fn hashes_are_stable() {
        // SHA-256 of the empty string, the usual reference value.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
