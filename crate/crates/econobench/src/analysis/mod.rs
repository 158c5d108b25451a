//! The analysis layer: behavioral Turing test, Wasserstein dissimilarity,
//! CES utility machinery, preference curves, multinomial-logit fits, and
//! cross-game inconsistency.
//!
//! Everything here is a pure function of its inputs; randomized routines take
//! an explicit seed. Per-game analyses can safely run in parallel.

mod logit;
mod preference;
mod turing;
mod utility;
mod wasserstein;

pub use logit::{fit_logit_b, action_log_probs, action_probs, LogitFit};
pub use preference::{
    average_curve, default_b_grid, inconsistency_score, preference_curve, CurveScope,
    PreferenceCurve,
};
pub use turing::{turing_test, TuringMethod, TuringResult};
pub use utility::{
    ces_utility, expected_utility, expected_utility_profile, EuProfile, PartnerModel,
    UtilityParams,
};
pub use wasserstein::{
    dissimilarity_matrix, wasserstein_1d, wasserstein_normalized, DissimilarityMatrix,
    PlayerDistributions,
};

use thiserror::Error;

use crate::games::{GameError, GameId};
use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("distributions belong to different games ({0} vs {1})")]
    GameMismatch(GameId, GameId),
    #[error("partner model does not fit {game}: expected {expected}")]
    PartnerMismatch { game: GameId, expected: &'static str },
    #[error("utility weight must lie in [0, 1], got {0}")]
    WeightOutOfRange(f64),
    #[error("CES exponent must be positive, got {0}")]
    ExponentOutOfRange(f64),
    #[error("payoffs must be non-negative, got ({own}, {partner})")]
    NegativePayoff { own: f64, partner: f64 },
    #[error("Bomb Risk has no partner payoff; two-payoff utilities are undefined")]
    BombRiskUnsupported,
    #[error("{game}: best-response utility is not positive (u* = {u_star})")]
    DegenerateUtility { game: GameId, u_star: f64 },
    #[error("observed distribution has no samples")]
    EmptyObservations,
    #[error("log-likelihood is not finite at b = {0}")]
    NonFiniteLikelihood(f64),
    #[error("preference curves use different grids or exponents")]
    GridMismatch,
    #[error("inconsistency needs at least two per-game curves")]
    NeedTwoCurves,
    #[error("b grid must be ascending within [0, 1]")]
    BadGrid,
    #[error("player {player} has no distribution for {game}")]
    MissingGame { player: String, game: GameId },
    #[error("return fraction {0} is outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Store(#[from] StoreError),
}
