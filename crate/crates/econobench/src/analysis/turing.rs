//! The behavioral Turing test.
//!
//! One round draws a human action and an AI action independently from their
//! distributions and compares the two by their probability under the *human*
//! distribution: the more human-probable action wins, equal probabilities
//! split the point. The AI's winning rate is the expected score; an AI whose
//! distribution equals the human one scores exactly 0.5.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::AnalysisError;
use crate::games::GameId;
use crate::store::ActionDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuringMethod {
    /// Enumerate the full product of both supports.
    Exact,
    /// Sample `n_rounds` pairs with a seeded generator.
    MonteCarlo { n_rounds: u64, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct TuringResult {
    pub game_id: GameId,
    /// Expected score of the AI against the human draw, in `[0, 1]`.
    pub win_rate: f64,
    pub method: TuringMethod,
    /// Binomial-style standard error (Monte Carlo only).
    pub std_err: Option<f64>,
}

/// Score of one AI draw `a` against one human draw `h`, judged by the human
/// distribution `H`: 1 if `H(a) > H(h)`, 0.5 on ties, else 0.
fn round_score(h_of_a: f64, h_of_h: f64) -> f64 {
    if h_of_a > h_of_h {
        1.0
    } else if h_of_a == h_of_h {
        0.5
    } else {
        0.0
    }
}

pub fn turing_test(
    ai: &ActionDistribution,
    human: &ActionDistribution,
    method: TuringMethod,
) -> Result<TuringResult, AnalysisError> {
    if ai.game_id() != human.game_id() {
        return Err(AnalysisError::GameMismatch(ai.game_id(), human.game_id()));
    }
    let result = match method {
        TuringMethod::Exact => TuringResult {
            game_id: ai.game_id(),
            win_rate: exact_win_rate(ai, human),
            method,
            std_err: None,
        },
        TuringMethod::MonteCarlo { n_rounds, seed } => {
            let (win_rate, std_err) = monte_carlo_win_rate(ai, human, n_rounds, seed);
            TuringResult {
                game_id: ai.game_id(),
                win_rate,
                method,
                std_err: Some(std_err),
            }
        }
    };
    Ok(result)
}

/// Exact expectation over both supports.
///
/// Grouping human draws by their probability value gives, for an AI action
/// with human probability `v`, a score of `P[H(h) < v] + 0.5 * P[H(h) = v]`.
/// This is O(n log n) and numerically tighter than the full product sum.
fn exact_win_rate(ai: &ActionDistribution, human: &ActionDistribution) -> f64 {
    // Distinct human probability values, ascending, with the total human mass
    // at each value.
    let mut levels: Vec<f64> = human.probs().to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut value_mass: Vec<(f64, f64)> = Vec::with_capacity(levels.len());
    for v in levels {
        match value_mass.last_mut() {
            Some((value, mass)) if *value == v => *mass += v,
            _ => value_mass.push((v, v)),
        }
    }
    // Mass strictly below each distinct value.
    let mut below = Vec::with_capacity(value_mass.len());
    let mut acc = 0.0;
    for &(_, mass) in &value_mass {
        below.push(acc);
        acc += mass;
    }

    // Compensated accumulation; the self-test identity win(H, H) = 1/2
    // should survive in floating point as tightly as possible.
    let mut win = 0.0;
    let mut compensation = 0.0;
    for (action, p_ai) in ai.pairs() {
        let v = human.prob(action);
        let score = if v == 0.0 {
            // Outside the human support: loses to every drawable human action.
            0.0
        } else {
            let i = value_mass
                .binary_search_by(|(value, _)| value.partial_cmp(&v).unwrap())
                .expect("v comes from the human distribution");
            below[i] + 0.5 * value_mass[i].1
        };
        let term = p_ai * score - compensation;
        let next = win + term;
        compensation = (next - win) - term;
        win = next;
    }
    win
}

fn monte_carlo_win_rate(
    ai: &ActionDistribution,
    human: &ActionDistribution,
    n_rounds: u64,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..n_rounds {
        let a = sample(ai, &mut rng);
        let h = sample(human, &mut rng);
        total += round_score(human.prob(a), human.prob(h));
    }
    let p = total / n_rounds as f64;
    let std_err = (p * (1.0 - p) / n_rounds as f64).sqrt();
    (p, std_err)
}

fn sample(dist: &ActionDistribution, rng: &mut ChaCha8Rng) -> crate::games::Action {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (action, p) in dist.pairs() {
        acc += p;
        if u < acc {
            return action;
        }
    }
    // Guard against the accumulated sum landing a hair below 1.
    *dist.support().last().expect("non-empty support")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::Action;

    fn human() -> ActionDistribution {
        ActionDistribution::from_counts(
            GameId::Dictator,
            [(Action::Amount(50), 6), (Action::Amount(0), 4)],
        )
        .unwrap()
    }

    #[test]
    fn self_test_scores_half() {
        let h = human();
        let r = turing_test(&h, &h, TuringMethod::Exact).unwrap();
        assert_eq!(r.win_rate, 0.5);
    }

    #[test]
    fn point_mass_on_the_human_mode_scores_point_seven() {
        let ai = ActionDistribution::point_mass(GameId::Dictator, Action::Amount(50));
        let r = turing_test(&ai, &human(), TuringMethod::Exact).unwrap();
        assert_eq!(r.win_rate, 0.7);
    }

    #[test]
    fn point_mass_outside_the_human_support_scores_zero() {
        let ai = ActionDistribution::point_mass(GameId::Dictator, Action::Amount(99));
        let r = turing_test(&ai, &human(), TuringMethod::Exact).unwrap();
        assert_eq!(r.win_rate, 0.0);
    }

    #[test]
    fn monte_carlo_tracks_the_exact_value() {
        let ai = ActionDistribution::point_mass(GameId::Dictator, Action::Amount(50));
        let r = turing_test(
            &ai,
            &human(),
            TuringMethod::MonteCarlo {
                n_rounds: 100_000,
                seed: 7,
            },
        )
        .unwrap();
        let se = r.std_err.unwrap();
        assert!(se > 0.0);
        assert!((r.win_rate - 0.7).abs() <= 4.0 * se, "{}", r.win_rate);
    }

    #[test]
    fn game_mismatch_is_rejected() {
        let ai = ActionDistribution::point_mass(GameId::PublicGoods, Action::Amount(10));
        assert!(matches!(
            turing_test(&ai, &human(), TuringMethod::Exact),
            Err(AnalysisError::GameMismatch(_, _))
        ));
    }
}
