//! Guards against negative transfer.
//!
//! * Weight dilution (ranking strategies): each source model is dropped with
//!   a probability that grows with the iteration count and with how rarely it
//!   out-ranks the target model across bootstrap samples.
//! * Mode switching (regression strategies): the run alternates between the
//!   ensemble and the target GP alone, switching with a probability driven
//!   by the recent change in K-fold prediction error after a step that did
//!   not improve the incumbent.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::seed::Rng;
use crate::weighting::{kfold_splits, target_only_weights, PredictionMatrix};

pub const DEFAULT_FOLDS: usize = 3;

/// `p_drop,i = 1 − (1 − t/T)·fᵢ`, where `fᵢ` is the fraction of samples in
/// which source `i` has strictly lower loss than the target (last column).
pub fn drop_probabilities(losses: &[Vec<u64>], t: usize, budget: usize) -> Vec<f64> {
    let Some(first) = losses.first() else {
        return Vec::new();
    };
    let n_sources = first.len() - 1;
    let s = losses.len() as f64;
    let remaining = 1.0 - (t as f64 / budget.max(1) as f64).clamp(0.0, 1.0);
    (0..n_sources)
        .map(|i| {
            let wins = losses.iter().filter(|row| row[i] < row[n_sources]).count() as f64;
            (1.0 - remaining * wins / s).clamp(0.0, 1.0)
        })
        .collect()
}

/// Keep (`true`) / drop mask over source models.
pub fn weight_dilution_mask(losses: &[Vec<u64>], t: usize, budget: usize, rng: &mut Rng) -> Vec<bool> {
    drop_probabilities(losses, t, budget)
        .into_iter()
        .map(|p| rng.random::<f64>() >= p)
        .collect()
}

/// Zeroes dropped sources and renormalises; if nothing is left the target
/// model takes all the weight.
pub fn apply_mask(weights: &[f64], keep: &[bool]) -> Vec<f64> {
    let n = weights.len();
    let mut w: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(i, &v)| if i < n - 1 && !keep[i] { 0.0 } else { v })
        .collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 && total.is_finite() {
        w.iter_mut().for_each(|v| *v /= total);
        w
    } else {
        target_only_weights(n)
    }
}

/// Mean held-out MSE over `k` contiguous folds, weights fitted on the
/// remaining folds by `fit`. `None` when `k < 2` or there are fewer than
/// `2k` rows.
pub fn kfold_mse<F>(pm: &PredictionMatrix, k: usize, mut fit: F) -> Result<Option<f64>>
where
    F: FnMut(&PredictionMatrix) -> Result<Vec<f64>>,
{
    if k < 2 || pm.n_rows() < 2 * k {
        return Ok(None);
    }
    let mut total = 0.0;
    for (train, test) in kfold_splits(pm.n_rows(), k) {
        let w = fit(&pm.select_rows(&train))?;
        let held = pm.select_rows(&test);
        let err: f64 = (0..held.n_rows())
            .map(|j| {
                let pred: f64 = held.means.row(j).iter().zip(&w).map(|(a, b)| a * b).sum();
                (held.y[j] - pred).powi(2)
            })
            .sum();
        total += err / held.n_rows() as f64;
    }
    Ok(Some(total / k as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardMode {
    Ensemble,
    TargetOnly,
}

impl GuardMode {
    pub fn flipped(self) -> Self {
        match self {
            GuardMode::Ensemble => GuardMode::TargetOnly,
            GuardMode::TargetOnly => GuardMode::Ensemble,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardState {
    pub mode: GuardMode,
    pub mse_history: Vec<f64>,
    /// Best objective value after each observation.
    pub incumbent_history: Vec<f64>,
}

impl Default for GuardState {
    fn default() -> Self {
        GuardState {
            mode: GuardMode::Ensemble,
            mse_history: Vec::new(),
            incumbent_history: Vec::new(),
        }
    }
}

impl GuardState {
    pub fn record_observation(&mut self, y: f64) {
        let best = self.incumbent_history.last().map_or(y, |b| b.min(y));
        self.incumbent_history.push(best);
    }

    pub fn record_mse(&mut self, mse: f64) {
        self.mse_history.push(mse);
    }

    /// Whether the latest observation lowered the incumbent.
    pub fn last_improved(&self) -> Option<bool> {
        match self.incumbent_history.as_slice() {
            [.., before, after] => Some(after < before),
            _ => None,
        }
    }

    /// Draws the mode flip; returns whether the mode changed.
    pub fn maybe_switch(&mut self, rng: &mut Rng) -> bool {
        let p = mode_switch_probability(self);
        let flip = rng.random::<f64>() < p;
        if flip {
            self.mode = self.mode.flipped();
        }
        flip
    }
}

/// `1[no improvement] · max(0, (mse₁ − m̄)/m̄)` with `m̄` the mean of the last
/// two MSE values, clamped to `[0, 1]`; zero when history is too short or
/// `m̄ = 0`.
pub fn mode_switch_probability(state: &GuardState) -> f64 {
    let [.., older, last] = state.mse_history.as_slice() else {
        return 0.0;
    };
    match state.last_improved() {
        Some(false) => {}
        _ => return 0.0,
    }
    let mean = 0.5 * (last + older);
    if !(mean > 0.0) {
        return 0.0;
    }
    ((last - mean) / mean).clamp(0.0, 1.0)
}
