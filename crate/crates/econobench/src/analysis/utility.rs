//! CES utility over own/partner payoffs and its expectation against a
//! partner playing a fixed distribution.
//!
//! The utility of an outcome is
//! `U_b = [b * own^r + (1 - b) * partner^r]^(1/r)`
//! with weight `b` in `[0, 1]` (1 = purely selfish, 0 = purely selfless) and
//! a positive exponent `r` (1 gives the linear blend, 1/2 the square-root
//! CES form). Expected utility of an action averages `U_b` over the partner
//! outcome distribution.
//!
//! Fitting routines evaluate expected utilities for many values of `b` at a
//! fixed `r`, so [`EuKernel`] precomputes per-action payoff moments: for
//! `r = 1` the expectation is linear in `(E[own], E[partner])`, and for
//! `r = 1/2` it is the quadratic form
//! `b^2 E[own] + 2b(1-b) E[sqrt(own * partner)] + (1-b)^2 E[partner]`.
//! Other exponents fall back to the per-outcome sum.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisError;
use crate::games::{Action, GameId, GameSpec, PartnerAction};
use crate::store::ActionDistribution;

/// Preference weight and CES exponent of the utility function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityParams {
    /// Weight on the own payoff, in `[0, 1]`.
    pub b: f64,
    /// CES exponent, positive. The supported presets are 1 and 1/2.
    pub r: f64,
}

impl UtilityParams {
    pub fn new(b: f64, r: f64) -> Result<UtilityParams, AnalysisError> {
        if !(0.0..=1.0).contains(&b) {
            return Err(AnalysisError::WeightOutOfRange(b));
        }
        if r <= 0.0 || !r.is_finite() {
            return Err(AnalysisError::ExponentOutOfRange(r));
        }
        Ok(UtilityParams { b, r })
    }
}

/// CES utility of a single outcome. Exact at the endpoints: `b = 1` returns
/// the own payoff and `b = 0` the partner payoff.
pub fn ces_utility(own: f64, partner: f64, params: &UtilityParams) -> Result<f64, AnalysisError> {
    if own < 0.0 || partner < 0.0 || !own.is_finite() || !partner.is_finite() {
        return Err(AnalysisError::NegativePayoff { own, partner });
    }
    Ok(ces_unchecked(own, partner, params.b, params.r))
}

/// The raw formula, also usable for `b` slightly outside `[0, 1]` (needed by
/// finite-difference curvature probes at a boundary estimate). The inner
/// aggregate is floored at zero so fractional exponents stay defined.
fn ces_unchecked(own: f64, partner: f64, b: f64, r: f64) -> f64 {
    if b == 1.0 {
        return own;
    }
    if b == 0.0 {
        return partner;
    }
    if r == 1.0 {
        return b * own + (1.0 - b) * partner;
    }
    let inner = (b * own.powf(r) + (1.0 - b) * partner.powf(r)).max(0.0);
    inner.powf(1.0 / r)
}

/// The partner side of a game, as a distribution over the partner's decision
/// variable.
#[derive(Debug, Clone, PartialEq)]
pub enum PartnerModel {
    /// No partner decision affects the payoff (Dictator, trust banker).
    Trivial,
    /// Distribution over the responder's minimum acceptable amount
    /// (partner for the ultimatum proposer).
    ResponderMinimum(ActionDistribution),
    /// Distribution over the proposer's offer (partner for the responder).
    ProposerOffer(ActionDistribution),
    /// Distribution over the banker's return fraction of the multiplied
    /// investment (partner for the trust investor).
    ReturnFraction { fractions: Vec<f64>, probs: Vec<f64> },
    /// Per-player distribution over a co-player's contribution
    /// (partner for Public Goods; the co-players draw independently).
    Contribution(ActionDistribution),
    /// Distribution over the opponent's move (Prisoner's Dilemma).
    OpponentMove(ActionDistribution),
}

impl PartnerModel {
    /// Build the partner model for `spec` from the human baseline: the
    /// proposer faces the human responder minima, the responder the human
    /// offers, the investor the human banker's returns (rescaled to return
    /// fractions so they apply at any investment level), Public Goods the
    /// human contribution distribution per co-player, and the Prisoner's
    /// Dilemma the human move distribution.
    pub fn for_game(
        spec: &GameSpec,
        baseline: &crate::store::HumanBaseline,
    ) -> Result<PartnerModel, AnalysisError> {
        let model = match spec.game_id() {
            GameId::Dictator | GameId::TrustBanker | GameId::BombRisk => PartnerModel::Trivial,
            GameId::UltimatumProposer => PartnerModel::ResponderMinimum(
                baseline.distribution(GameId::UltimatumResponder)?.clone(),
            ),
            GameId::UltimatumResponder => PartnerModel::ProposerOffer(
                baseline.distribution(GameId::UltimatumProposer)?.clone(),
            ),
            GameId::TrustInvestor => {
                let banker = baseline.distribution(GameId::TrustBanker)?;
                let total =
                    spec.params().trust_multiplier * spec.params().trust_investment;
                PartnerModel::from_banker_returns(banker, total)?
            }
            GameId::PublicGoods => {
                PartnerModel::Contribution(baseline.distribution(GameId::PublicGoods)?.clone())
            }
            GameId::PrisonersDilemma => PartnerModel::OpponentMove(
                baseline.distribution(GameId::PrisonersDilemma)?.clone(),
            ),
        };
        Ok(model)
    }

    /// Rescale a banker return distribution (amounts out of `multiplied`)
    /// into a distribution over return fractions.
    pub fn from_banker_returns(
        banker: &ActionDistribution,
        multiplied: f64,
    ) -> Result<PartnerModel, AnalysisError> {
        let mut fractions = Vec::new();
        let mut probs = Vec::new();
        for (action, p) in banker.pairs() {
            let y = match action {
                Action::Amount(y) => y as f64,
                Action::Move(_) => {
                    return Err(AnalysisError::PartnerMismatch {
                        game: GameId::TrustInvestor,
                        expected: "banker return amounts",
                    })
                }
            };
            let f = y / multiplied;
            if !(0.0..=1.0).contains(&f) {
                return Err(AnalysisError::FractionOutOfRange(f));
            }
            fractions.push(f);
            probs.push(p);
        }
        Ok(PartnerModel::ReturnFraction { fractions, probs })
    }

    fn expected_kind(game_id: GameId) -> &'static str {
        match game_id {
            GameId::Dictator | GameId::TrustBanker => "trivial",
            GameId::UltimatumProposer => "responder minimum",
            GameId::UltimatumResponder => "proposer offer",
            GameId::TrustInvestor => "return fraction",
            GameId::PublicGoods => "co-player contribution",
            GameId::PrisonersDilemma => "opponent move",
            GameId::BombRisk => "none (no partner payoff)",
        }
    }
}

fn amounts_of(dist: &ActionDistribution, game: GameId) -> Result<Vec<(i64, f64)>, AnalysisError> {
    dist.pairs()
        .map(|(action, p)| match action {
            Action::Amount(a) => Ok((a, p)),
            Action::Move(_) => Err(AnalysisError::PartnerMismatch {
                game,
                expected: "amounts",
            }),
        })
        .collect()
}

/// Distribution of the sum of `n` independent draws from a per-player
/// contribution distribution. Exact discrete convolution.
fn convolve_sum(per_player: &[(i64, f64)], n: usize) -> Vec<(i64, f64)> {
    let mut acc: BTreeMap<i64, f64> = BTreeMap::new();
    acc.insert(0, 1.0);
    for _ in 0..n {
        let mut next: BTreeMap<i64, f64> = BTreeMap::new();
        for (&s, &p) in &acc {
            for &(v, q) in per_player {
                *next.entry(s + v).or_insert(0.0) += p * q;
            }
        }
        acc = next;
    }
    acc.into_iter().collect()
}

/// Per-action outcome table: probability and payoff pair of every distinct
/// partner outcome. Identical payoff pairs are merged.
struct OutcomeTable {
    actions: Vec<Action>,
    /// `(probability, own, partner)` per outcome, per action.
    outcomes: Vec<Vec<(f64, f64, f64)>>,
}

fn outcome_table(spec: &GameSpec, partner: &PartnerModel) -> Result<OutcomeTable, AnalysisError> {
    let game = spec.game_id();
    if game == GameId::BombRisk {
        return Err(AnalysisError::BombRiskUnsupported);
    }
    // The partner decisions and their probabilities, independent of the
    // focal action.
    let partner_draws: Vec<(Option<PartnerAction>, f64)> = match (game, partner) {
        (GameId::Dictator | GameId::TrustBanker, PartnerModel::Trivial) => vec![(None, 1.0)],
        (GameId::UltimatumProposer, PartnerModel::ResponderMinimum(d)) => amounts_of(d, game)?
            .into_iter()
            .map(|(m, p)| (Some(PartnerAction::Amount(m)), p))
            .collect(),
        (GameId::UltimatumResponder, PartnerModel::ProposerOffer(d)) => amounts_of(d, game)?
            .into_iter()
            .map(|(x, p)| (Some(PartnerAction::Amount(x)), p))
            .collect(),
        (GameId::TrustInvestor, PartnerModel::ReturnFraction { fractions, probs }) => fractions
            .iter()
            .zip(probs)
            .map(|(&f, &p)| (Some(PartnerAction::Fraction(f)), p))
            .collect(),
        (GameId::PublicGoods, PartnerModel::Contribution(d)) => {
            let per_player = amounts_of(d, game)?;
            let n_others = spec.params().public_goods_players as usize - 1;
            convolve_sum(&per_player, n_others)
                .into_iter()
                .map(|(s, p)| (Some(PartnerAction::Amount(s)), p))
                .collect()
        }
        (GameId::PrisonersDilemma, PartnerModel::OpponentMove(d)) => d
            .pairs()
            .map(|(action, p)| match action {
                Action::Move(m) => Ok((Some(PartnerAction::Move(m)), p)),
                Action::Amount(_) => Err(AnalysisError::PartnerMismatch {
                    game,
                    expected: "moves",
                }),
            })
            .collect::<Result<_, _>>()?,
        _ => {
            return Err(AnalysisError::PartnerMismatch {
                game,
                expected: PartnerModel::expected_kind(game),
            })
        }
    };

    let actions: Vec<Action> = spec.action_space().iter().collect();
    let mut outcomes = Vec::with_capacity(actions.len());
    for &action in &actions {
        // Merge partner draws that lead to the same payoff pair (e.g. every
        // accepted ultimatum offer), keyed by the payoff bit patterns.
        let mut merged: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for (draw, p) in &partner_draws {
            let pay = spec.payoff(action, *draw)?;
            *merged
                .entry((pay.own.to_bits(), pay.partner.to_bits()))
                .or_insert(0.0) += p;
        }
        outcomes.push(
            merged
                .into_iter()
                .map(|((own, partner), p)| (p, f64::from_bits(own), f64::from_bits(partner)))
                .collect(),
        );
    }
    Ok(OutcomeTable { actions, outcomes })
}

/// Expected utilities of every action in a game's space.
#[derive(Debug, Clone)]
pub struct EuProfile {
    pub actions: Vec<Action>,
    pub values: Vec<f64>,
}

impl EuProfile {
    /// The action with the highest expected utility; ties break toward the
    /// smallest action. `None` only for an empty profile, which the
    /// constructors rule out.
    pub fn best_action(&self) -> Option<(Action, f64)> {
        let mut best: Option<(Action, f64)> = None;
        for (&action, &value) in self.actions.iter().zip(&self.values) {
            match best {
                Some((_, v)) if value <= v => {}
                _ => best = Some((action, value)),
            }
        }
        best
    }
}

/// Expected CES utility of one action against the partner model:
/// the probability-weighted utility over all partner outcomes.
///
/// Dictator and the trust banker accept [`PartnerModel::Trivial`]; Bomb Risk
/// is rejected because it has no partner payoff.
pub fn expected_utility(
    spec: &GameSpec,
    action: Action,
    partner: &PartnerModel,
    params: &UtilityParams,
) -> Result<f64, AnalysisError> {
    let table = outcome_table(spec, partner)?;
    let idx = table
        .actions
        .iter()
        .position(|&a| a == action)
        .ok_or(crate::games::GameError::OutOfRange {
            game: spec.game_id(),
            action,
        })?;
    let mut eu = 0.0;
    for &(p, own, partner_pay) in &table.outcomes[idx] {
        eu += p * ces_utility(own, partner_pay, params)?;
    }
    Ok(eu)
}

/// Expected utilities of all actions at once.
pub fn expected_utility_profile(
    spec: &GameSpec,
    partner: &PartnerModel,
    params: &UtilityParams,
) -> Result<EuProfile, AnalysisError> {
    let kernel = EuKernel::build(spec, partner, params.r)?;
    Ok(EuProfile {
        values: kernel.eval(params.b),
        actions: kernel.actions,
    })
}

/// Precomputed payoff moments for evaluating the full expected-utility
/// profile at many values of `b` with a fixed exponent.
pub(crate) struct EuKernel {
    pub(crate) actions: Vec<Action>,
    kind: KernelKind,
}

enum KernelKind {
    /// `r = 1`: EU is linear in b.
    Linear { e_own: Vec<f64>, e_partner: Vec<f64> },
    /// `r = 1/2`: EU is quadratic in b.
    Sqrt {
        e_own: Vec<f64>,
        e_cross: Vec<f64>,
        e_partner: Vec<f64>,
    },
    /// Any other exponent: keep the outcome lists.
    General {
        r: f64,
        outcomes: Vec<Vec<(f64, f64, f64)>>,
        e_own: Vec<f64>,
        e_partner: Vec<f64>,
    },
}

impl EuKernel {
    pub(crate) fn build(
        spec: &GameSpec,
        partner: &PartnerModel,
        r: f64,
    ) -> Result<EuKernel, AnalysisError> {
        if r <= 0.0 || !r.is_finite() {
            return Err(AnalysisError::ExponentOutOfRange(r));
        }
        let table = outcome_table(spec, partner)?;
        for row in &table.outcomes {
            for &(_, own, partner_pay) in row {
                if own < 0.0 || partner_pay < 0.0 {
                    return Err(AnalysisError::NegativePayoff {
                        own,
                        partner: partner_pay,
                    });
                }
            }
        }
        let expect = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
            table
                .outcomes
                .iter()
                .map(|row| row.iter().map(|&(p, o, q)| p * f(o, q)).sum())
                .collect()
        };
        let e_own = expect(&|o, _| o);
        let e_partner = expect(&|_, q| q);
        let kind = if r == 1.0 {
            KernelKind::Linear { e_own, e_partner }
        } else if r == 0.5 {
            KernelKind::Sqrt {
                e_cross: expect(&|o, q| (o * q).sqrt()),
                e_own,
                e_partner,
            }
        } else {
            KernelKind::General {
                r,
                outcomes: table.outcomes,
                e_own,
                e_partner,
            }
        };
        Ok(EuKernel {
            actions: table.actions,
            kind,
        })
    }

    /// Expected utility of every action at weight `b`. Values of `b` outside
    /// `[0, 1]` are permitted for curvature probes.
    pub(crate) fn eval(&self, b: f64) -> Vec<f64> {
        match &self.kind {
            KernelKind::Linear { e_own, e_partner } => e_own
                .iter()
                .zip(e_partner)
                .map(|(&o, &q)| b * o + (1.0 - b) * q)
                .collect(),
            KernelKind::Sqrt {
                e_own,
                e_cross,
                e_partner,
            } => {
                let (bo, bc, bq) = (b * b, 2.0 * b * (1.0 - b), (1.0 - b) * (1.0 - b));
                e_own
                    .iter()
                    .zip(e_cross)
                    .zip(e_partner)
                    .map(|((&o, &c), &q)| bo * o + bc * c + bq * q)
                    .collect()
            }
            KernelKind::General {
                r,
                outcomes,
                e_own,
                e_partner,
            } => {
                if b == 1.0 {
                    return e_own.clone();
                }
                if b == 0.0 {
                    return e_partner.clone();
                }
                outcomes
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|&(p, o, q)| p * ces_unchecked(o, q, b, *r))
                            .sum()
                    })
                    .collect()
            }
        }
    }
}
