//! Preference curves: how far observed behavior is from the best response
//! under each candidate weight `b`, and how consistent those curves are
//! across games.
//!
//! For one game and one `b`, expected utilities are normalized by the
//! best-response utility, and the error is the observation-weighted mean
//! squared gap to 1. A curve sweeps `b` over a grid; the cross-game
//! inconsistency is the mean absolute deviation of the per-game curves from
//! their pointwise mean.

use serde::Serialize;

use crate::analysis::utility::EuKernel;
use crate::analysis::{AnalysisError, PartnerModel};
use crate::games::{GameId, GameSpec};
use crate::store::ActionDistribution;

/// What a curve describes: a single game, or the average across games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurveScope {
    Game(GameId),
    Average,
}

impl std::fmt::Display for CurveScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurveScope::Game(g) => write!(f, "{}", g.key()),
            CurveScope::Average => f.write_str("average"),
        }
    }
}

/// Optimization error against the best response, per grid value of `b`.
#[derive(Debug, Clone, Serialize)]
pub struct PreferenceCurve {
    pub scope: CurveScope,
    /// CES exponent the curve was computed at.
    pub r: f64,
    /// Ascending grid over `[0, 1]`.
    pub b_grid: Vec<f64>,
    /// Mean squared error at each grid point; non-negative and finite.
    pub mse: Vec<f64>,
}

impl PreferenceCurve {
    /// The grid value minimizing the error (first minimum on ties).
    pub fn argmin(&self) -> f64 {
        let mut best = 0;
        for i in 1..self.mse.len() {
            if self.mse[i] < self.mse[best] {
                best = i;
            }
        }
        self.b_grid[best]
    }
}

/// An evenly spaced grid over `[0, 1]` with the given step (default 0.02).
/// The step is snapped to an integer number of cells so the grid ends
/// exactly at 1.
pub fn default_b_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round().max(1.0) as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Compute the preference curve of an observed distribution.
///
/// For each `b`: expected utilities `eu` of all actions are scaled by the
/// best-response utility `u* = max eu` (which must be positive), and
/// `MSE(b) = sum_a observed(a) * (eu(a)/u* - 1)^2`.
pub fn preference_curve(
    spec: &GameSpec,
    observed: &ActionDistribution,
    partner: &PartnerModel,
    r: f64,
    b_grid: &[f64],
) -> Result<PreferenceCurve, AnalysisError> {
    if observed.game_id() != spec.game_id() {
        return Err(AnalysisError::GameMismatch(
            observed.game_id(),
            spec.game_id(),
        ));
    }
    check_grid(b_grid)?;
    let kernel = EuKernel::build(spec, partner, r)?;

    let observed_idx: Vec<(usize, f64)> = observed
        .pairs()
        .map(|(action, p)| {
            kernel
                .actions
                .iter()
                .position(|&a| a == action)
                .map(|i| (i, p))
                .ok_or(AnalysisError::Game(crate::games::GameError::OutOfRange {
                    game: spec.game_id(),
                    action,
                }))
        })
        .collect::<Result<_, _>>()?;

    let mut mse = Vec::with_capacity(b_grid.len());
    for &b in b_grid {
        let eu = kernel.eval(b);
        let u_star = eu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if u_star <= 0.0 || u_star.is_nan() {
            return Err(AnalysisError::DegenerateUtility {
                game: spec.game_id(),
                u_star,
            });
        }
        let err: f64 = observed_idx
            .iter()
            .map(|&(i, p)| {
                let gap = eu[i] / u_star - 1.0;
                p * gap * gap
            })
            .sum();
        mse.push(err);
    }
    Ok(PreferenceCurve {
        scope: CurveScope::Game(spec.game_id()),
        r,
        b_grid: b_grid.to_vec(),
        mse,
    })
}

/// Unweighted pointwise mean of per-game curves sharing a grid and exponent.
pub fn average_curve(curves: &[PreferenceCurve]) -> Result<PreferenceCurve, AnalysisError> {
    let first = curves.first().ok_or(AnalysisError::NeedTwoCurves)?;
    check_same_axes(curves)?;
    let n = curves.len() as f64;
    let mse = (0..first.b_grid.len())
        .map(|i| curves.iter().map(|c| c.mse[i]).sum::<f64>() / n)
        .collect();
    Ok(PreferenceCurve {
        scope: CurveScope::Average,
        r: first.r,
        b_grid: first.b_grid.clone(),
        mse,
    })
}

/// Cross-game inconsistency: with `E(b)` the pointwise mean of the per-game
/// curves, the mean over games and grid points of `|MSE_g(b) - E(b)|`.
/// Identical curves score zero.
pub fn inconsistency_score(curves: &[PreferenceCurve]) -> Result<f64, AnalysisError> {
    if curves.len() < 2 {
        return Err(AnalysisError::NeedTwoCurves);
    }
    check_same_axes(curves)?;
    let grid_len = curves[0].b_grid.len();
    // Compensated summation keeps the textbook cases exact.
    let mut total = 0.0;
    let mut compensation = 0.0;
    let mut add = |x: f64| {
        let y = x - compensation;
        let t = total + y;
        compensation = (t - total) - y;
        total = t;
    };
    for i in 0..grid_len {
        let mean = curves.iter().map(|c| c.mse[i]).sum::<f64>() / curves.len() as f64;
        for c in curves {
            add((c.mse[i] - mean).abs());
        }
    }
    Ok(total / (curves.len() * grid_len) as f64)
}

fn check_grid(b_grid: &[f64]) -> Result<(), AnalysisError> {
    if b_grid.is_empty() {
        return Err(AnalysisError::BadGrid);
    }
    for w in b_grid.windows(2) {
        if w[0] >= w[1] {
            return Err(AnalysisError::BadGrid);
        }
    }
    if b_grid[0] < 0.0 || *b_grid.last().unwrap() > 1.0 {
        return Err(AnalysisError::BadGrid);
    }
    Ok(())
}

fn check_same_axes(curves: &[PreferenceCurve]) -> Result<(), AnalysisError> {
    let first = &curves[0];
    for c in &curves[1..] {
        if c.r != first.r || c.b_grid != first.b_grid {
            return Err(AnalysisError::GridMismatch);
        }
    }
    Ok(())
}
