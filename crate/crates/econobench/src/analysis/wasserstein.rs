//! Exact 1-D Wasserstein distance between discrete distributions, and the
//! pairwise dissimilarity matrix aggregated across games.

use std::collections::BTreeMap;

use crate::analysis::AnalysisError;
use crate::games::{GameId, GameSpec};
use crate::store::{normalize_support, ActionDistribution, NormalizedDistribution};

/// W1 between two discrete distributions on the real line: the integral of
/// |CDF_a - CDF_b| over the merged support. Exact for finite supports.
fn w1_discrete(xa: &[f64], pa: &[f64], xb: &[f64], pb: &[f64]) -> f64 {
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut cdf_a, mut cdf_b) = (0.0f64, 0.0f64);
    let mut prev: Option<f64> = None;
    let mut total = 0.0;
    while ia < xa.len() || ib < xb.len() {
        let x = match (xa.get(ia), xb.get(ib)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        if let Some(prev) = prev {
            total += (cdf_a - cdf_b).abs() * (x - prev);
        }
        while ia < xa.len() && xa[ia] == x {
            cdf_a += pa[ia];
            ia += 1;
        }
        while ib < xb.len() && xb[ib] == x {
            cdf_b += pb[ib];
            ib += 1;
        }
        prev = Some(x);
    }
    total
}

/// W1 between two behavior distributions of the same game, on the game's raw
/// numeric embedding (amounts in dollars/boxes, defect = 0 / cooperate = 1).
pub fn wasserstein_1d(
    a: &ActionDistribution,
    b: &ActionDistribution,
) -> Result<f64, AnalysisError> {
    if a.game_id() != b.game_id() {
        return Err(AnalysisError::GameMismatch(a.game_id(), b.game_id()));
    }
    let xa: Vec<f64> = a.support().iter().map(|a| a.embedding()).collect();
    let xb: Vec<f64> = b.support().iter().map(|a| a.embedding()).collect();
    Ok(w1_discrete(&xa, a.probs(), &xb, b.probs()))
}

/// W1 between two distributions already mapped onto `[0, 1]`.
pub fn wasserstein_normalized(
    a: &NormalizedDistribution,
    b: &NormalizedDistribution,
) -> Result<f64, AnalysisError> {
    if a.game_id != b.game_id {
        return Err(AnalysisError::GameMismatch(a.game_id, b.game_id));
    }
    Ok(w1_discrete(&a.points, &a.probs, &b.points, &b.probs))
}

/// One player's behavior across games.
#[derive(Debug, Clone)]
pub struct PlayerDistributions {
    pub name: String,
    pub per_game: BTreeMap<GameId, ActionDistribution>,
}

/// Symmetric pairwise dissimilarity with a zero diagonal.
#[derive(Debug, Clone)]
pub struct DissimilarityMatrix {
    pub players: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl DissimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }
}

/// Pairwise behavior dissimilarity: for each pair of players, the unweighted
/// mean over `games` of the W1 distance on normalized supports. Every player
/// must have a distribution for every requested game.
pub fn dissimilarity_matrix(
    players: &[PlayerDistributions],
    specs: &BTreeMap<GameId, GameSpec>,
    games: &[GameId],
) -> Result<DissimilarityMatrix, AnalysisError> {
    // Normalize every distribution once.
    let mut normalized: Vec<Vec<NormalizedDistribution>> = Vec::with_capacity(players.len());
    for player in players {
        let mut row = Vec::with_capacity(games.len());
        for &game in games {
            let dist =
                player
                    .per_game
                    .get(&game)
                    .ok_or_else(|| AnalysisError::MissingGame {
                        player: player.name.clone(),
                        game,
                    })?;
            let spec = specs.get(&game).ok_or_else(|| AnalysisError::MissingGame {
                player: "<specs>".into(),
                game,
            })?;
            row.push(normalize_support(dist, spec.action_space())?);
        }
        normalized.push(row);
    }

    let n = players.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut sum = 0.0;
            for g in 0..games.len() {
                sum += wasserstein_normalized(&normalized[i][g], &normalized[j][g])?;
            }
            let mean = sum / games.len() as f64;
            values[i][j] = mean;
            values[j][i] = mean;
        }
    }
    Ok(DissimilarityMatrix {
        players: players.iter().map(|p| p.name.clone()).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::Action;

    fn uniform_pair(game: GameId, a: i64, b: i64) -> ActionDistribution {
        ActionDistribution::from_counts(game, [(Action::Amount(a), 1), (Action::Amount(b), 1)])
            .unwrap()
    }

    #[test]
    fn identical_distributions_have_zero_distance() {
        let d = uniform_pair(GameId::Dictator, 10, 90);
        assert_eq!(wasserstein_1d(&d, &d).unwrap(), 0.0);
    }

    #[test]
    fn point_masses_measure_their_gap() {
        let a = ActionDistribution::point_mass(GameId::Dictator, Action::Amount(25));
        let b = ActionDistribution::point_mass(GameId::Dictator, Action::Amount(75));
        assert_eq!(wasserstein_1d(&a, &b).unwrap(), 50.0);
    }

    #[test]
    fn normalized_point_masses_at_range_ends_give_one() {
        let spec = GameSpec::new(GameId::Dictator);
        let a = ActionDistribution::point_mass(GameId::Dictator, Action::Amount(0));
        let b = ActionDistribution::point_mass(GameId::Dictator, Action::Amount(100));
        let na = normalize_support(&a, spec.action_space()).unwrap();
        let nb = normalize_support(&b, spec.action_space()).unwrap();
        assert_eq!(wasserstein_normalized(&na, &nb).unwrap(), 1.0);
    }

    #[test]
    fn cross_game_comparison_is_rejected() {
        let a = ActionDistribution::point_mass(GameId::Dictator, Action::Amount(1));
        let b = ActionDistribution::point_mass(GameId::PublicGoods, Action::Amount(1));
        assert!(matches!(
            wasserstein_1d(&a, &b),
            Err(AnalysisError::GameMismatch(_, _))
        ));
    }

    #[test]
    fn matrix_averages_per_game_distances() {
        // Two players differing only in Dictator by a normalized W1 of 0.4.
        let games: Vec<GameId> = GameId::ALL.to_vec();
        let specs: BTreeMap<GameId, GameSpec> = games
            .iter()
            .map(|&g| (g, GameSpec::new(g)))
            .collect();
        let shared: BTreeMap<GameId, ActionDistribution> = games
            .iter()
            .map(|&g| {
                let action = specs[&g].action_space().iter().next().unwrap();
                (g, ActionDistribution::point_mass(g, action))
            })
            .collect();
        let mut shifted = shared.clone();
        shifted.insert(
            GameId::Dictator,
            ActionDistribution::point_mass(GameId::Dictator, Action::Amount(40)),
        );

        let players = vec![
            PlayerDistributions {
                name: "a".into(),
                per_game: shared,
            },
            PlayerDistributions {
                name: "b".into(),
                per_game: shifted,
            },
        ];
        let matrix = dissimilarity_matrix(&players, &specs, &games).unwrap();
        assert_eq!(matrix.get(0, 0), 0.0);
        assert_eq!(matrix.get(1, 1), 0.0);
        assert!((matrix.get(0, 1) - 0.4 / 8.0).abs() < 1e-15);
        assert_eq!(matrix.get(0, 1), matrix.get(1, 0));
    }

    #[test]
    fn missing_game_is_an_error() {
        let specs: BTreeMap<GameId, GameSpec> =
            [(GameId::Dictator, GameSpec::new(GameId::Dictator))].into();
        let players = vec![PlayerDistributions {
            name: "empty".into(),
            per_game: BTreeMap::new(),
        }];
        assert!(matches!(
            dissimilarity_matrix(&players, &specs, &[GameId::Dictator]),
            Err(AnalysisError::MissingGame { .. })
        ));
    }
}
