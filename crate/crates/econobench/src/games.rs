//! The six behavioral economics games and their eight player roles.
//!
//! Each role is described by a [`GameSpec`]: a finite action space plus a
//! payoff rule mapping the player's action (and, where the game has one, the
//! partner's decision) to an own/partner payoff pair. Every numeric parameter
//! lives in [`GameParams`] so a different parameterization can be swapped in
//! from a config file without touching the rules.
//!
//! All functions here are pure; specs are cheap to clone and safe to share
//! across threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The eight player roles, in the canonical reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameId {
    Dictator,
    UltimatumProposer,
    UltimatumResponder,
    TrustInvestor,
    TrustBanker,
    PublicGoods,
    BombRisk,
    PrisonersDilemma,
}

impl GameId {
    /// All roles in reporting order.
    pub const ALL: [GameId; 8] = [
        GameId::Dictator,
        GameId::UltimatumProposer,
        GameId::UltimatumResponder,
        GameId::TrustInvestor,
        GameId::TrustBanker,
        GameId::PublicGoods,
        GameId::BombRisk,
        GameId::PrisonersDilemma,
    ];

    /// Stable snake_case identifier used in file names and config keys.
    pub fn key(&self) -> &'static str {
        match self {
            GameId::Dictator => "dictator",
            GameId::UltimatumProposer => "ultimatum_proposer",
            GameId::UltimatumResponder => "ultimatum_responder",
            GameId::TrustInvestor => "trust_investor",
            GameId::TrustBanker => "trust_banker",
            GameId::PublicGoods => "public_goods",
            GameId::BombRisk => "bomb_risk",
            GameId::PrisonersDilemma => "prisoners_dilemma",
        }
    }

    /// Human-readable label.
    pub fn label(&self) -> &'static str {
        match self {
            GameId::Dictator => "Dictator",
            GameId::UltimatumProposer => "Ultimatum - Proposer",
            GameId::UltimatumResponder => "Ultimatum - Responder",
            GameId::TrustInvestor => "Trust - Investor",
            GameId::TrustBanker => "Trust - Banker",
            GameId::PublicGoods => "Public Goods",
            GameId::BombRisk => "Bomb Risk",
            GameId::PrisonersDilemma => "Prisoner's Dilemma",
        }
    }

    pub fn parse_key(s: &str) -> Option<GameId> {
        GameId::ALL.iter().copied().find(|g| g.key() == s)
    }
}

impl std::fmt::Display for GameId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A move in the Prisoner's Dilemma. `Defect` sorts before `Cooperate`,
/// matching the numeric embedding (defect = 0, cooperate = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    Defect,
    Cooperate,
}

impl std::fmt::Display for Move {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Move::Defect => f.write_str("Defect"),
            Move::Cooperate => f.write_str("Cooperate"),
        }
    }
}

/// One decision by the focal player.
///
/// Orders by the game's numeric embedding: amounts by value, `Defect` below
/// `Cooperate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// A dollar amount or a count of boxes/contribution units.
    Amount(i64),
    /// A Prisoner's Dilemma move.
    Move(Move),
}

impl Action {
    /// Numeric embedding used for distances: amounts map to their value,
    /// defect to 0 and cooperate to 1.
    pub fn embedding(&self) -> f64 {
        match self {
            Action::Amount(a) => *a as f64,
            Action::Move(Move::Defect) => 0.0,
            Action::Move(Move::Cooperate) => 1.0,
        }
    }

    /// Parse the textual form used in baseline files: an integer, or a
    /// case-insensitive move name.
    pub fn parse_str(s: &str) -> Option<Action> {
        let s = s.trim();
        if let Ok(v) = s.parse::<i64>() {
            return Some(Action::Amount(v));
        }
        match s.to_ascii_lowercase().as_str() {
            "cooperate" => Some(Action::Move(Move::Cooperate)),
            "defect" => Some(Action::Move(Move::Defect)),
            _ => None,
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::Amount(a) => write!(f, "{a}"),
            Action::Move(m) => write!(f, "{m}"),
        }
    }
}

/// The partner's decision variable, where the payoff rule needs one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PartnerAction {
    /// Responder minimum, proposer offer, or the co-players' total contribution.
    Amount(i64),
    /// The banker's return as a fraction of the multiplied investment.
    Fraction(f64),
    /// The opponent's Prisoner's Dilemma move.
    Move(Move),
}

/// The finite set of decisions available in a role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionSpace {
    /// Integer amounts `lo..=hi`, step 1.
    Amounts { lo: i64, hi: i64 },
    /// The two Prisoner's Dilemma moves.
    Moves,
}

impl ActionSpace {
    pub fn len(&self) -> usize {
        match self {
            ActionSpace::Amounts { lo, hi } => (hi - lo + 1) as usize,
            ActionSpace::Moves => 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        false // lo <= hi is enforced at construction
    }

    pub fn contains(&self, action: Action) -> bool {
        match (self, action) {
            (ActionSpace::Amounts { lo, hi }, Action::Amount(a)) => (*lo..=*hi).contains(&a),
            (ActionSpace::Moves, Action::Move(_)) => true,
            _ => false,
        }
    }

    /// Iterate actions in ascending embedding order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = Action> + '_> {
        match self {
            ActionSpace::Amounts { lo, hi } => Box::new((*lo..=*hi).map(Action::Amount)),
            ActionSpace::Moves => Box::new(
                [Action::Move(Move::Defect), Action::Move(Move::Cooperate)].into_iter(),
            ),
        }
    }

    /// Embedding bounds `(lo, hi)` of the space.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            ActionSpace::Amounts { lo, hi } => (*lo as f64, *hi as f64),
            ActionSpace::Moves => (0.0, 1.0),
        }
    }
}

/// Prisoner's Dilemma payoffs. Must satisfy `T > R > P > S` and `2R > T + S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdPayoffs {
    /// Mutual cooperation.
    pub reward: f64,
    /// Defecting against a cooperator.
    pub temptation: f64,
    /// Mutual defection.
    pub punishment: f64,
    /// Cooperating against a defector.
    pub sucker: f64,
}

impl Default for PdPayoffs {
    fn default() -> Self {
        PdPayoffs {
            reward: 200.0,
            temptation: 300.0,
            punishment: 100.0,
            sucker: 0.0,
        }
    }
}

impl PdPayoffs {
    fn validate(&self) -> Result<(), GameError> {
        let PdPayoffs {
            reward: r,
            temptation: t,
            punishment: p,
            sucker: s,
        } = *self;
        if [r, t, p, s].iter().any(|v| !v.is_finite()) {
            return Err(GameError::InvalidParams(
                "prisoner's dilemma payoffs must be finite".into(),
            ));
        }
        if t <= r || r <= p || p <= s {
            return Err(GameError::InvalidParams(format!(
                "prisoner's dilemma payoffs must satisfy T > R > P > S, got T={t} R={r} P={p} S={s}"
            )));
        }
        if 2.0 * r <= t + s {
            return Err(GameError::InvalidParams(format!(
                "prisoner's dilemma payoffs must satisfy 2R > T + S, got R={r} T={t} S={s}"
            )));
        }
        Ok(())
    }
}

/// Numeric parameters of a single role. `endowment` is the focal endowment of
/// that role's game (100 for the money-splitting games, 20 for Public Goods).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameParams {
    pub endowment: f64,
    /// Trust game multiplier `k` applied to the invested amount.
    pub trust_multiplier: f64,
    /// The fixed investment the banker role is analyzed at.
    pub trust_investment: f64,
    /// Number of players in the Public Goods game, including the focal one.
    pub public_goods_players: u32,
    /// Pot multiplier `M` in the Public Goods game.
    pub public_goods_multiplier: f64,
    /// Number of boxes in the Bomb Risk game (one hides the bomb).
    pub bomb_boxes: i64,
    pub pd_payoffs: PdPayoffs,
}

impl Default for GameParams {
    fn default() -> Self {
        GameParams {
            endowment: 100.0,
            trust_multiplier: 3.0,
            trust_investment: 50.0,
            public_goods_players: 4,
            public_goods_multiplier: 2.0,
            bomb_boxes: 100,
            pd_payoffs: PdPayoffs::default(),
        }
    }
}

impl GameParams {
    /// Compiled-in defaults for a role. Identical across roles except for the
    /// Public Goods endowment of 20.
    pub fn defaults_for(game_id: GameId) -> GameParams {
        let mut p = GameParams::default();
        if game_id == GameId::PublicGoods {
            p.endowment = 20.0;
        }
        p
    }

    fn validate(&self, game_id: GameId) -> Result<(), GameError> {
        let money = [
            self.endowment,
            self.trust_multiplier,
            self.trust_investment,
            self.public_goods_multiplier,
        ];
        if money.iter().any(|v| !v.is_finite()) {
            return Err(GameError::InvalidParams(
                "game parameters must be finite".into(),
            ));
        }
        if self.endowment < 0.0 || self.trust_investment < 0.0 {
            return Err(GameError::InvalidParams(
                "money parameters must be non-negative".into(),
            ));
        }
        if self.trust_multiplier <= 1.0 {
            return Err(GameError::InvalidParams(format!(
                "trust multiplier must exceed 1, got {}",
                self.trust_multiplier
            )));
        }
        let n = self.public_goods_players as f64;
        if self.public_goods_multiplier <= 1.0 || self.public_goods_multiplier >= n {
            return Err(GameError::InvalidParams(format!(
                "public goods multiplier must satisfy 1 < M < N, got M={} N={}",
                self.public_goods_multiplier, n
            )));
        }
        if self.bomb_boxes < 1 {
            return Err(GameError::InvalidParams("need at least one box".into()));
        }
        if game_id == GameId::TrustBanker && self.trust_investment > self.endowment {
            return Err(GameError::InvalidParams(format!(
                "trust investment {} exceeds the investor endowment {}",
                self.trust_investment, self.endowment
            )));
        }
        self.pd_payoffs.validate()
    }
}

/// Own and partner payoff of one outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffPair {
    pub own: f64,
    pub partner: f64,
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid game parameters: {0}")]
    InvalidParams(String),
    #[error("action {action} is outside the {game} action space")]
    OutOfRange { game: GameId, action: Action },
    #[error("{game} requires a partner decision ({expected}) but none was given")]
    MissingPartner { game: GameId, expected: &'static str },
    #[error("{game} takes no partner decision")]
    UnexpectedPartner { game: GameId },
    #[error("{game} expects a {expected} partner decision")]
    WrongPartnerKind { game: GameId, expected: &'static str },
    #[error("partner decision {0} is out of range")]
    PartnerOutOfRange(String),
    #[error("Bomb Risk has a scalar payoff; use bomb_payoff_ev")]
    ScalarPayoffOnly,
    #[error("{0} is not a Bomb Risk spec")]
    NotBombRisk(GameId),
}

/// A fully parameterized role: identifier, parameters, and the derived finite
/// action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    game_id: GameId,
    params: GameParams,
    action_space: ActionSpace,
}

impl GameSpec {
    /// Build a spec with the compiled-in default parameters.
    pub fn new(game_id: GameId) -> GameSpec {
        // defaults always validate
        GameSpec::with_params(game_id, GameParams::defaults_for(game_id)).unwrap()
    }

    /// Build a spec with explicit parameters, validating the game invariants.
    pub fn with_params(game_id: GameId, params: GameParams) -> Result<GameSpec, GameError> {
        params.validate(game_id)?;
        let action_space = derive_action_space(game_id, &params);
        Ok(GameSpec {
            game_id,
            params,
            action_space,
        })
    }

    pub fn game_id(&self) -> GameId {
        self.game_id
    }

    pub fn params(&self) -> &GameParams {
        &self.params
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.action_space
    }

    /// Own/partner payoffs for one outcome of the game.
    ///
    /// The partner argument is required exactly for the roles whose payoff
    /// depends on the partner: the proposer needs the responder's minimum,
    /// the responder needs the offer, the investor needs the banker's return
    /// fraction, Public Goods needs the co-players' total contribution, and
    /// the Prisoner's Dilemma needs the opponent's move. Dictator and the
    /// trust banker take `None`. Bomb Risk has no payoff pair; see
    /// [`GameSpec::bomb_payoff_ev`].
    pub fn payoff(
        &self,
        own_action: Action,
        partner_action: Option<PartnerAction>,
    ) -> Result<PayoffPair, GameError> {
        if !self.action_space.contains(own_action) {
            return Err(GameError::OutOfRange {
                game: self.game_id,
                action: own_action,
            });
        }
        let p = &self.params;
        let e = p.endowment;
        match self.game_id {
            GameId::Dictator => {
                self.expect_no_partner(partner_action)?;
                let x = amount(own_action) as f64;
                Ok(PayoffPair {
                    own: e - x,
                    partner: x,
                })
            }
            GameId::UltimatumProposer => {
                let m = self.partner_amount(partner_action, "responder minimum", 0, e as i64)?;
                let x = amount(own_action);
                if x >= m {
                    Ok(PayoffPair {
                        own: e - x as f64,
                        partner: x as f64,
                    })
                } else {
                    Ok(PayoffPair {
                        own: 0.0,
                        partner: 0.0,
                    })
                }
            }
            GameId::UltimatumResponder => {
                let x = self.partner_amount(partner_action, "proposer offer", 0, e as i64)?;
                let m = amount(own_action);
                if x >= m {
                    Ok(PayoffPair {
                        own: x as f64,
                        partner: e - x as f64,
                    })
                } else {
                    Ok(PayoffPair {
                        own: 0.0,
                        partner: 0.0,
                    })
                }
            }
            GameId::TrustInvestor => {
                let f = self.partner_fraction(partner_action)?;
                let x = amount(own_action) as f64;
                let multiplied = p.trust_multiplier * x;
                Ok(PayoffPair {
                    own: e - x + f * multiplied,
                    partner: multiplied - f * multiplied,
                })
            }
            GameId::TrustBanker => {
                self.expect_no_partner(partner_action)?;
                let y = amount(own_action) as f64;
                let received = p.trust_multiplier * p.trust_investment;
                Ok(PayoffPair {
                    own: received - y,
                    partner: (e - p.trust_investment) + y,
                })
            }
            GameId::PublicGoods => {
                let n = p.public_goods_players as f64;
                let others = p.public_goods_players as i64 - 1;
                let max_sum = others * e as i64;
                let s = self.partner_amount(partner_action, "co-player contributions", 0, max_sum)?
                    as f64;
                let c = amount(own_action) as f64;
                let share = p.public_goods_multiplier * (c + s) / n;
                Ok(PayoffPair {
                    own: e - c + share,
                    // Mean payoff of the other N-1 players: each gets
                    // e - c_j + share, and the c_j average to s/(N-1).
                    partner: e - s / (n - 1.0) + share,
                })
            }
            GameId::BombRisk => Err(GameError::ScalarPayoffOnly),
            GameId::PrisonersDilemma => {
                let theirs = self.partner_move(partner_action)?;
                let mine = match own_action {
                    Action::Move(m) => m,
                    Action::Amount(_) => unreachable!("space check rejects amounts"),
                };
                let m = &p.pd_payoffs;
                let (own, partner) = match (mine, theirs) {
                    (Move::Cooperate, Move::Cooperate) => (m.reward, m.reward),
                    (Move::Cooperate, Move::Defect) => (m.sucker, m.temptation),
                    (Move::Defect, Move::Cooperate) => (m.temptation, m.sucker),
                    (Move::Defect, Move::Defect) => (m.punishment, m.punishment),
                };
                Ok(PayoffPair { own, partner })
            }
        }
    }

    /// Expected payoff of opening `n` boxes when one bomb hides uniformly
    /// among `B` boxes and every safe box pays one unit: `n * (B - n) / B`.
    pub fn bomb_payoff_ev(&self, n: i64) -> Result<f64, GameError> {
        if self.game_id != GameId::BombRisk {
            return Err(GameError::NotBombRisk(self.game_id));
        }
        let b = self.params.bomb_boxes;
        if !(0..=b).contains(&n) {
            return Err(GameError::OutOfRange {
                game: self.game_id,
                action: Action::Amount(n),
            });
        }
        Ok(n as f64 * (b - n) as f64 / b as f64)
    }

    fn expect_no_partner(&self, partner: Option<PartnerAction>) -> Result<(), GameError> {
        match partner {
            None => Ok(()),
            Some(_) => Err(GameError::UnexpectedPartner { game: self.game_id }),
        }
    }

    fn partner_amount(
        &self,
        partner: Option<PartnerAction>,
        expected: &'static str,
        lo: i64,
        hi: i64,
    ) -> Result<i64, GameError> {
        match partner {
            Some(PartnerAction::Amount(a)) if (lo..=hi).contains(&a) => Ok(a),
            Some(PartnerAction::Amount(a)) => {
                Err(GameError::PartnerOutOfRange(format!("{expected} {a}")))
            }
            Some(_) => Err(GameError::WrongPartnerKind {
                game: self.game_id,
                expected,
            }),
            None => Err(GameError::MissingPartner {
                game: self.game_id,
                expected,
            }),
        }
    }

    fn partner_fraction(&self, partner: Option<PartnerAction>) -> Result<f64, GameError> {
        match partner {
            Some(PartnerAction::Fraction(f)) if (0.0..=1.0).contains(&f) => Ok(f),
            Some(PartnerAction::Fraction(f)) => {
                Err(GameError::PartnerOutOfRange(format!("return fraction {f}")))
            }
            Some(_) => Err(GameError::WrongPartnerKind {
                game: self.game_id,
                expected: "return fraction",
            }),
            None => Err(GameError::MissingPartner {
                game: self.game_id,
                expected: "return fraction",
            }),
        }
    }

    fn partner_move(&self, partner: Option<PartnerAction>) -> Result<Move, GameError> {
        match partner {
            Some(PartnerAction::Move(m)) => Ok(m),
            Some(_) => Err(GameError::WrongPartnerKind {
                game: self.game_id,
                expected: "move",
            }),
            None => Err(GameError::MissingPartner {
                game: self.game_id,
                expected: "move",
            }),
        }
    }
}

fn amount(action: Action) -> i64 {
    match action {
        Action::Amount(a) => a,
        Action::Move(_) => unreachable!("space check rejects moves"),
    }
}

fn derive_action_space(game_id: GameId, params: &GameParams) -> ActionSpace {
    match game_id {
        GameId::Dictator
        | GameId::UltimatumProposer
        | GameId::UltimatumResponder
        | GameId::TrustInvestor => ActionSpace::Amounts {
            lo: 0,
            hi: params.endowment as i64,
        },
        GameId::TrustBanker => ActionSpace::Amounts {
            lo: 0,
            hi: (params.trust_multiplier * params.trust_investment).floor() as i64,
        },
        GameId::PublicGoods => ActionSpace::Amounts {
            lo: 0,
            hi: params.endowment as i64,
        },
        GameId::BombRisk => ActionSpace::Amounts {
            lo: 0,
            hi: params.bomb_boxes,
        },
        GameId::PrisonersDilemma => ActionSpace::Moves,
    }
}
