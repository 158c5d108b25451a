//! Maximum-likelihood estimation of the preference weight `b` under the
//! multinomial logit choice model.
//!
//! An agent is assumed to pick action `k` with probability proportional to
//! `exp(u_b(k))`, where `u_b` is the expected utility of `k` normalized by
//! the best-response utility and scaled to `[0, 100]`. The normalization
//! keeps the softmax argument on a comparable scale across games; raw dollar
//! utilities would saturate the exponential.
//!
//! The point estimate is constrained to `[0, 1]`; the 95% confidence
//! interval is left unclipped, so it may extend past the bounds when the
//! estimate sits at one.

use serde::Serialize;

use crate::analysis::utility::EuKernel;
use crate::analysis::{AnalysisError, PartnerModel, UtilityParams};
use crate::games::{Action, GameId, GameSpec};
use crate::store::ActionDistribution;

/// Scale of the normalized utility fed to the softmax.
const UTILITY_SCALE: f64 = 100.0;
/// Resolution of the coarse likelihood scan over `[0, 1]`.
const GRID_STEPS: usize = 100;
/// The argmax is refined until the bracket is narrower than this.
const B_TOLERANCE: f64 = 1e-5;
/// Step for the central-difference curvature estimate.
const CURVATURE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct LogitFit {
    pub game_id: GameId,
    /// CES exponent the fit was run at.
    pub r: f64,
    /// Maximum-likelihood weight, in `[0, 1]`.
    pub b_hat: f64,
    /// Inverse-curvature standard error; infinite when the likelihood has no
    /// local curvature at the estimate.
    pub std_err: f64,
    /// Unclipped 95% interval `b_hat ± 1.96 * std_err`.
    pub ci_95: (f64, f64),
    pub log_likelihood: f64,
}

/// Log choice probabilities of every action under the logit model, using a
/// numerically stable log-sum-exp.
pub fn action_log_probs(
    spec: &GameSpec,
    partner: &PartnerModel,
    params: &UtilityParams,
) -> Result<(Vec<Action>, Vec<f64>), AnalysisError> {
    let kernel = EuKernel::build(spec, partner, params.r)?;
    let log_probs = scaled_log_probs(spec.game_id(), &kernel, params.b)?;
    Ok((kernel.actions, log_probs))
}

/// Choice probabilities of every action under the logit model.
pub fn action_probs(
    spec: &GameSpec,
    partner: &PartnerModel,
    params: &UtilityParams,
) -> Result<(Vec<Action>, Vec<f64>), AnalysisError> {
    let (actions, log_probs) = action_log_probs(spec, partner, params)?;
    Ok((actions, log_probs.iter().map(|lp| lp.exp()).collect()))
}

fn scaled_log_probs(
    game: GameId,
    kernel: &EuKernel,
    b: f64,
) -> Result<Vec<f64>, AnalysisError> {
    let eu = kernel.eval(b);
    let u_star = eu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if u_star <= 0.0 || u_star.is_nan() {
        return Err(AnalysisError::DegenerateUtility { game, u_star });
    }
    let scaled: Vec<f64> = eu.iter().map(|v| v / u_star * UTILITY_SCALE).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scaled.iter().map(|u| (u - max).exp()).sum::<f64>().ln();
    Ok(scaled.iter().map(|u| u - lse).collect())
}

/// Fit the weight `b` to an observed distribution by maximum likelihood.
///
/// The log-likelihood is scanned on a coarse grid over `[0, 1]` and the best
/// cell is refined by golden-section search; the standard error comes from
/// the central-difference curvature at the estimate.
pub fn fit_logit_b(
    spec: &GameSpec,
    observed: &ActionDistribution,
    partner: &PartnerModel,
    r: f64,
) -> Result<LogitFit, AnalysisError> {
    if observed.game_id() != spec.game_id() {
        return Err(AnalysisError::GameMismatch(
            observed.game_id(),
            spec.game_id(),
        ));
    }
    if observed.n_samples() == 0 {
        return Err(AnalysisError::EmptyObservations);
    }
    let kernel = EuKernel::build(spec, partner, r)?;

    // Observation weights aligned with the kernel's action order. Exact
    // counts when the histogram is count-backed, `prob * n` otherwise.
    let weights: Vec<(usize, f64)> = {
        let mut weights = Vec::with_capacity(observed.support().len());
        for (action, prob) in observed.pairs() {
            let idx = kernel
                .actions
                .iter()
                .position(|&a| a == action)
                .ok_or(crate::games::GameError::OutOfRange {
                    game: spec.game_id(),
                    action,
                })?;
            let w = match observed.count(action) {
                Some(c) => c as f64,
                None => prob * observed.n_samples() as f64,
            };
            weights.push((idx, w));
        }
        weights
    };

    let game = spec.game_id();
    let loglik = |b: f64| -> Result<f64, AnalysisError> {
        let log_probs = scaled_log_probs(game, &kernel, b)?;
        let ll = weights.iter().map(|&(i, w)| w * log_probs[i]).sum();
        if !f64::is_finite(ll) {
            return Err(AnalysisError::NonFiniteLikelihood(b));
        }
        Ok(ll)
    };

    // Coarse scan.
    let mut best_i = 0;
    let mut best_ll = f64::NEG_INFINITY;
    for i in 0..=GRID_STEPS {
        let b = i as f64 / GRID_STEPS as f64;
        let ll = loglik(b)?;
        if ll > best_ll {
            best_ll = ll;
            best_i = i;
        }
    }
    let cell = 1.0 / GRID_STEPS as f64;
    let lo = (best_i as f64 / GRID_STEPS as f64 - cell).max(0.0);
    let hi = (best_i as f64 / GRID_STEPS as f64 + cell).min(1.0);
    let b_hat = golden_max(&loglik, lo, hi, B_TOLERANCE)?;

    let ll_hat = loglik(b_hat)?;
    let h = CURVATURE_STEP;
    let curvature = (loglik(b_hat + h)? - 2.0 * ll_hat + loglik(b_hat - h)?) / (h * h);
    let std_err = if curvature < 0.0 {
        (-curvature).recip().sqrt()
    } else {
        f64::INFINITY
    };
    Ok(LogitFit {
        game_id: spec.game_id(),
        r,
        b_hat,
        std_err,
        ci_95: (b_hat - 1.96 * std_err, b_hat + 1.96 * std_err),
        log_likelihood: ll_hat,
    })
}

/// Golden-section search for the maximum of a smooth function on `[lo, hi]`.
fn golden_max(
    f: &impl Fn(f64) -> Result<f64, AnalysisError>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64, AnalysisError> {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - (hi - lo) * INVPHI;
    let mut x2 = lo + (hi - lo) * INVPHI;
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + (hi - lo) * INVPHI;
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - (hi - lo) * INVPHI;
            f1 = f(x1)?;
        }
    }
    Ok((lo + hi) / 2.0)
}
