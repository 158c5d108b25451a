//! Scripted reference agents and reply parsing.
//!
//! The scripted agents have known ground-truth preferences, which makes them
//! the oracles for every estimator downstream: a best-response agent built
//! with weight `b` should be judged maximally consistent with `b`, and a
//! softmax agent's samples should recover `b` under the logit fit.
//!
//! Agents own their random state: one instance must not be shared across
//! threads, while distinct instances are independent given distinct seeds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

use crate::analysis::{
    action_probs, expected_utility_profile, AnalysisError, PartnerModel, UtilityParams,
};
use crate::games::{Action, GameId, GameSpec, Move};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("remote agents are driven through the connector, not decide()")]
    RemoteAgent,
    #[error("fixed action {action} is outside the {game} action space")]
    FixedActionOutOfRange { game: GameId, action: Action },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// What drives an agent's decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AgentKind {
    /// Deterministic argmax of expected utility; ties break toward the
    /// smallest action.
    BestResponse(UtilityParams),
    /// Samples actions with probability proportional to the exponential of
    /// the scaled expected utility.
    SoftmaxLogit(UtilityParams),
    /// Always plays one action.
    PointMass(Action),
    /// Uniform over the action space.
    UniformRandom,
    /// A chat-completion endpoint; decisions are collected over the wire.
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub agent_id: String,
    pub kind: AgentKind,
    /// Recorded so every run is replayable.
    pub seed: u64,
}

/// A playable agent instance with its own random state.
pub struct ScriptedAgent {
    profile: AgentProfile,
    rng: ChaCha8Rng,
}

impl ScriptedAgent {
    pub fn new(profile: AgentProfile) -> ScriptedAgent {
        let rng = ChaCha8Rng::seed_from_u64(profile.seed);
        ScriptedAgent { profile, rng }
    }

    pub fn profile(&self) -> &AgentProfile {
        &self.profile
    }

    /// Produce one decision. Games whose payoff depends on the partner need
    /// a matching partner model; Bomb Risk uses its scalar expected payoff
    /// as the utility.
    pub fn decide(
        &mut self,
        spec: &GameSpec,
        partner: &PartnerModel,
    ) -> Result<Action, AgentError> {
        match self.profile.kind.clone() {
            AgentKind::BestResponse(params) => best_response(spec, partner, &params),
            AgentKind::SoftmaxLogit(params) => {
                let (actions, probs) = softmax_action_probs(spec, partner, &params)?;
                Ok(actions[sample_index(&probs, &mut self.rng)])
            }
            AgentKind::PointMass(action) => {
                if !spec.action_space().contains(action) {
                    return Err(AgentError::FixedActionOutOfRange {
                        game: spec.game_id(),
                        action,
                    });
                }
                Ok(action)
            }
            AgentKind::UniformRandom => {
                let actions: Vec<Action> = spec.action_space().iter().collect();
                Ok(actions[self.rng.gen_range(0..actions.len())])
            }
            AgentKind::Remote => Err(AgentError::RemoteAgent),
        }
    }
}

/// Deterministic argmax of expected utility, smallest action on ties.
pub fn best_response(
    spec: &GameSpec,
    partner: &PartnerModel,
    params: &UtilityParams,
) -> Result<Action, AgentError> {
    let profile = utility_profile(spec, partner, params)?;
    let mut best: Option<(Action, f64)> = None;
    for (action, value) in profile {
        match best {
            Some((_, v)) if value <= v => {}
            _ => best = Some((action, value)),
        }
    }
    Ok(best.expect("action spaces are non-empty").0)
}

/// Softmax choice probabilities used by [`AgentKind::SoftmaxLogit`]: the
/// logit model over best-response-normalized utilities. Bomb Risk, which has
/// no partner payoff, uses its normalized expected payoff the same way.
pub fn softmax_action_probs(
    spec: &GameSpec,
    partner: &PartnerModel,
    params: &UtilityParams,
) -> Result<(Vec<Action>, Vec<f64>), AnalysisError> {
    if spec.game_id() == GameId::BombRisk {
        let (actions, evs): (Vec<Action>, Vec<f64>) = bomb_profile(spec)?.into_iter().unzip();
        let max = evs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = evs.iter().map(|v| v / max * 100.0).collect();
        let m = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + scaled.iter().map(|u| (u - m).exp()).sum::<f64>().ln();
        return Ok((actions, scaled.iter().map(|u| (u - lse).exp()).collect()));
    }
    action_probs(spec, partner, params)
}

/// Expected utility (or Bomb Risk expected payoff) of every action.
fn utility_profile(
    spec: &GameSpec,
    partner: &PartnerModel,
    params: &UtilityParams,
) -> Result<Vec<(Action, f64)>, AgentError> {
    if spec.game_id() == GameId::BombRisk {
        return Ok(bomb_profile(spec)?);
    }
    let profile = expected_utility_profile(spec, partner, params)?;
    Ok(profile.actions.into_iter().zip(profile.values).collect())
}

fn bomb_profile(spec: &GameSpec) -> Result<Vec<(Action, f64)>, AnalysisError> {
    spec.action_space()
        .iter()
        .map(|action| {
            let n = match action {
                Action::Amount(n) => n,
                Action::Move(_) => unreachable!("bomb risk actions are amounts"),
            };
            Ok((action, spec.bomb_payoff_ev(n)?))
        })
        .collect()
}

fn sample_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Extract the decision from a free-form reply, or `None` when no
/// unambiguous in-range action can be found. Total over arbitrary text.
///
/// Numeric games prefer the last number carrying a decision marker (a `$`
/// prefix, a `dollars` suffix, or a box count for Bomb Risk), since replies
/// often restate the endowment before answering. Without any marked number,
/// a reply is accepted only if it contains exactly one distinct in-range
/// integer. The Prisoner's Dilemma matches the move keywords and rejects
/// replies naming both.
pub fn parse_action(raw_reply: &str, spec: &GameSpec) -> Option<Action> {
    if spec.game_id() == GameId::PrisonersDilemma {
        return parse_move(raw_reply);
    }

    let in_range = |v: i64| spec.action_space().contains(Action::Amount(v));

    // Last marked number wins.
    let mut marked: Vec<(usize, i64)> = Vec::new();
    for regex in marker_regexes(spec.game_id()) {
        for captures in regex.captures_iter(raw_reply) {
            let m = captures.get(1).expect("marker patterns capture digits");
            if let Ok(v) = m.as_str().replace(',', "").parse::<i64>() {
                marked.push((m.start(), v));
            }
        }
    }
    if !marked.is_empty() {
        marked.sort_by_key(|&(pos, _)| pos);
        let (_, v) = *marked.last().unwrap();
        return in_range(v).then_some(Action::Amount(v));
    }

    // Fallback: a single distinct in-range integer.
    let mut values: Vec<i64> = integer_regex()
        .find_iter(raw_reply)
        .filter_map(|m| m.as_str().replace(',', "").parse::<i64>().ok())
        .filter(|&v| in_range(v))
        .collect();
    values.sort_unstable();
    values.dedup();
    match values[..] {
        [only] => Some(Action::Amount(only)),
        _ => None,
    }
}

fn parse_move(raw_reply: &str) -> Option<Action> {
    static COOPERATE: OnceLock<Regex> = OnceLock::new();
    static DEFECT: OnceLock<Regex> = OnceLock::new();
    let cooperate = COOPERATE
        .get_or_init(|| Regex::new(r"(?i)\bcooperat(?:e|es|ed|ing|ion)?\b").unwrap());
    let defect =
        DEFECT.get_or_init(|| Regex::new(r"(?i)\bdefect(?:s|ed|ing|ion)?\b").unwrap());
    match (cooperate.is_match(raw_reply), defect.is_match(raw_reply)) {
        (true, false) => Some(Action::Move(Move::Cooperate)),
        (false, true) => Some(Action::Move(Move::Defect)),
        _ => None,
    }
}

fn marker_regexes(game_id: GameId) -> &'static [Regex] {
    static MONEY: OnceLock<Vec<Regex>> = OnceLock::new();
    static BOXES: OnceLock<Vec<Regex>> = OnceLock::new();
    let money = MONEY.get_or_init(|| {
        vec![
            Regex::new(r"\$\s*(\d[\d,]*)").unwrap(),
            Regex::new(r"(?i)\b(\d[\d,]*)\s*dollars?\b").unwrap(),
        ]
    });
    if game_id == GameId::BombRisk {
        let boxes = BOXES.get_or_init(|| {
            let mut v = money.clone();
            v.push(Regex::new(r"(?i)\b(\d[\d,]*)\s*box(?:es)?\b").unwrap());
            v
        });
        return boxes;
    }
    money
}

fn integer_regex() -> &'static Regex {
    static INTEGER: OnceLock<Regex> = OnceLock::new();
    INTEGER.get_or_init(|| Regex::new(r"\d[\d,]*").unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::GameSpec;

    fn agent(kind: AgentKind, seed: u64) -> ScriptedAgent {
        ScriptedAgent::new(AgentProfile {
            agent_id: "test".into(),
            kind,
            seed,
        })
    }

    fn params(b: f64, r: f64) -> UtilityParams {
        UtilityParams::new(b, r).unwrap()
    }

    #[test]
    fn best_response_limits_in_dictator() {
        let spec = GameSpec::new(GameId::Dictator);
        let mut selfish = agent(AgentKind::BestResponse(params(1.0, 1.0)), 0);
        assert_eq!(
            selfish.decide(&spec, &PartnerModel::Trivial).unwrap(),
            Action::Amount(0)
        );
        let mut selfless = agent(AgentKind::BestResponse(params(0.0, 1.0)), 0);
        assert_eq!(
            selfless.decide(&spec, &PartnerModel::Trivial).unwrap(),
            Action::Amount(100)
        );
    }

    #[test]
    fn welfare_maximizer_splits_evenly_under_ces() {
        // Independent check by direct enumeration of the closed form:
        // argmax over x of [0.5 sqrt(100 - x) + 0.5 sqrt(x)]^2.
        let oracle = (0..=100)
            .max_by(|&a, &b| {
                let u = |x: i64| {
                    let s = 0.5 * ((100 - x) as f64).sqrt() + 0.5 * (x as f64).sqrt();
                    s * s
                };
                u(a).partial_cmp(&u(b)).unwrap()
            })
            .unwrap();
        assert_eq!(oracle, 50);

        let spec = GameSpec::new(GameId::Dictator);
        let mut fair = agent(AgentKind::BestResponse(params(0.5, 0.5)), 0);
        assert_eq!(
            fair.decide(&spec, &PartnerModel::Trivial).unwrap(),
            Action::Amount(50)
        );
    }

    #[test]
    fn fully_tied_dictator_breaks_to_the_smallest_action() {
        // At b = 0.5, r = 1 every action has utility 50.
        let spec = GameSpec::new(GameId::Dictator);
        let mut tied = agent(AgentKind::BestResponse(params(0.5, 1.0)), 0);
        assert_eq!(
            tied.decide(&spec, &PartnerModel::Trivial).unwrap(),
            Action::Amount(0)
        );
    }

    #[test]
    fn best_response_ignores_the_seed() {
        let spec = GameSpec::new(GameId::UltimatumProposer);
        let partner = PartnerModel::ResponderMinimum(
            crate::store::ActionDistribution::from_counts(
                GameId::UltimatumResponder,
                [(Action::Amount(0), 1), (Action::Amount(40), 3)],
            )
            .unwrap(),
        );
        let mut a = agent(AgentKind::BestResponse(params(0.7, 1.0)), 1);
        let mut b = agent(AgentKind::BestResponse(params(0.7, 1.0)), 999);
        assert_eq!(
            a.decide(&spec, &partner).unwrap(),
            b.decide(&spec, &partner).unwrap()
        );
    }

    #[test]
    fn bomb_risk_best_response_is_risk_neutral() {
        let spec = GameSpec::new(GameId::BombRisk);
        let mut a = agent(AgentKind::BestResponse(params(1.0, 1.0)), 0);
        assert_eq!(
            a.decide(&spec, &PartnerModel::Trivial).unwrap(),
            Action::Amount(50)
        );
    }

    #[test]
    fn softmax_with_flat_utility_is_uniform() {
        // b = 0.5, r = 1 in Dictator: utility is constant, so sampling is
        // uniform over 101 actions. Chi-square goodness of fit at n = 10000;
        // 149.449 is the df = 100 critical value at significance 0.001.
        let spec = GameSpec::new(GameId::Dictator);
        let mut a = agent(AgentKind::SoftmaxLogit(params(0.5, 1.0)), 1234);
        let mut counts = [0u32; 101];
        for _ in 0..10_000 {
            match a.decide(&spec, &PartnerModel::Trivial).unwrap() {
                Action::Amount(x) => counts[x as usize] += 1,
                _ => unreachable!(),
            }
        }
        let expected = 10_000.0 / 101.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 149.449, "chi2 = {chi2}");
    }

    #[test]
    fn softmax_samples_match_the_analytic_law() {
        // Total variation between 10k samples and the analytic choice
        // probabilities stays below 0.05.
        let spec = GameSpec::new(GameId::Dictator);
        let p = params(0.6, 0.5);
        let (actions, probs) = softmax_action_probs(&spec, &PartnerModel::Trivial, &p).unwrap();
        let mut a = agent(AgentKind::SoftmaxLogit(p), 42);
        let n = 10_000;
        let mut counts = vec![0u32; actions.len()];
        for _ in 0..n {
            let action = a.decide(&spec, &PartnerModel::Trivial).unwrap();
            let i = actions.iter().position(|&x| x == action).unwrap();
            counts[i] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(&probs)
            .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.05, "tv = {tv}");
    }

    #[test]
    fn point_mass_and_uniform() {
        let spec = GameSpec::new(GameId::PublicGoods);
        let mut fixed = agent(AgentKind::PointMass(Action::Amount(10)), 0);
        assert_eq!(
            fixed.decide(&spec, &PartnerModel::Trivial).unwrap(),
            Action::Amount(10)
        );
        let mut bad = agent(AgentKind::PointMass(Action::Amount(21)), 0);
        assert!(matches!(
            bad.decide(&spec, &PartnerModel::Trivial),
            Err(AgentError::FixedActionOutOfRange { .. })
        ));
        let mut uniform = agent(AgentKind::UniformRandom, 7);
        for _ in 0..100 {
            let action = uniform.decide(&spec, &PartnerModel::Trivial).unwrap();
            assert!(spec.action_space().contains(action));
        }
    }

    #[test]
    fn remote_agents_refuse_to_decide() {
        let spec = GameSpec::new(GameId::Dictator);
        let mut remote = agent(AgentKind::Remote, 0);
        assert!(matches!(
            remote.decide(&spec, &PartnerModel::Trivial),
            Err(AgentError::RemoteAgent)
        ));
    }

    #[test]
    fn parser_handles_the_reference_replies() {
        let dictator = GameSpec::new(GameId::Dictator);
        assert_eq!(
            parse_action("I will offer $50 to my partner.", &dictator),
            Some(Action::Amount(50))
        );
        // The endowment restatement is ignored in favor of the final amount.
        assert_eq!(
            parse_action("Out of the $100, I will give you $30.", &dictator),
            Some(Action::Amount(30))
        );
        assert_eq!(
            parse_action("I'd say 25 dollars is fair.", &dictator),
            Some(Action::Amount(25))
        );
        assert_eq!(parse_action("somewhere between 30 and 70", &dictator), None);
        assert_eq!(parse_action("42", &dictator), Some(Action::Amount(42)));
        assert_eq!(parse_action("", &dictator), None);
        assert_eq!(parse_action("I give $150.", &dictator), None);

        let pd = GameSpec::new(GameId::PrisonersDilemma);
        assert_eq!(
            parse_action("I choose to Defect.", &pd),
            Some(Action::Move(Move::Defect))
        );
        assert_eq!(
            parse_action("COOPERATION is my choice", &pd),
            Some(Action::Move(Move::Cooperate))
        );
        assert_eq!(
            parse_action("I will not defect; I cooperate.", &pd),
            None
        );
        assert_eq!(parse_action("hmm", &pd), None);

        let bomb = GameSpec::new(GameId::BombRisk);
        assert_eq!(
            parse_action("I'll open 37 boxes.", &bomb),
            Some(Action::Amount(37))
        );
        assert_eq!(
            parse_action("Out of 100 boxes I open 40 boxes.", &bomb),
            Some(Action::Amount(40))
        );
    }

    #[test]
    fn parser_never_panics() {
        let mut runner = proptest::test_runner::TestRunner::default();
        let spec = GameSpec::new(GameId::Dictator);
        let pd = GameSpec::new(GameId::PrisonersDilemma);
        runner
            .run(&proptest::string::string_regex(".{0,200}").unwrap(), |s| {
                let _ = parse_action(&s, &spec);
                let _ = parse_action(&s, &pd);
                Ok(())
            })
            .unwrap();
    }
}
