//! Ensemble weighting strategies.
//!
//! Every strategy consumes a [`PredictionMatrix`]: one row per target
//! observation, one column per model (sources first, target last), holding
//! the models' posterior means at the target inputs. The target column uses
//! leave-one-out means so the target GP is scored out of sample like the
//! sources.
//!
//! * `lasso` / `ridge`: regularised least squares, optionally with `w ≥ 0`,
//!   averaged over bootstrap resamples of the rows.
//! * `rgpe`: bootstrap frequency of being a minimum-discordance model.
//! * `tstr`: Epanechnikov kernel of the discordant-pair fraction.
//! * `wac`: SGD on squared error with an L2 penalty; combines variances.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::ObservationDataset;
use crate::ensemble::{EnsembleModel, VarianceMode};
use crate::error::{Error, Result};
use crate::search_space::SearchSpace;
use crate::seed;
use crate::surrogate::GpSurrogate;

pub const DEFAULT_BOOTSTRAP_SAMPLES: usize = 1000;
pub const DEFAULT_BANDWIDTH: f64 = 0.1;
pub const CV_FOLDS: usize = 3;
/// Smallest target size for which the penalty is cross-validated.
pub const MIN_CV_POINTS: usize = 2 * CV_FOLDS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Lasso,
    Ridge,
    Rgpe,
    Tstr,
    Wac,
    /// All weight on the target model; the ensemble degenerates to plain BO.
    TargetOnly,
}

impl Strategy {
    pub fn is_regression(self) -> bool {
        matches!(self, Strategy::Lasso | Strategy::Ridge)
    }

    pub fn variance_mode(self) -> VarianceMode {
        match self {
            Strategy::Wac => VarianceMode::Weighted,
            _ => VarianceMode::TargetOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    pub validation_fraction: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.01,
            epochs: 500,
            l2_penalty: 0.01,
            validation_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightingConfig {
    pub strategy: Strategy,
    #[serde(default)]
    pub positive_constraint: bool,
    /// Fixed regularisation strength; pre-learned / cross-validated if absent.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_rho: f64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_samples: usize,
    #[serde(default)]
    pub sgd: SgdConfig,
}

fn default_bandwidth() -> f64 {
    DEFAULT_BANDWIDTH
}

fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP_SAMPLES
}

impl WeightingConfig {
    pub fn new(strategy: Strategy) -> Self {
        WeightingConfig {
            strategy,
            positive_constraint: false,
            alpha: None,
            bandwidth_rho: DEFAULT_BANDWIDTH,
            bootstrap_samples: DEFAULT_BOOTSTRAP_SAMPLES,
            sgd: SgdConfig::default(),
        }
    }

    pub fn positive(mut self, positive: bool) -> Self {
        self.positive_constraint = positive;
        self
    }

    pub fn penalty(&self) -> Option<Penalty> {
        match self.strategy {
            Strategy::Lasso => Some(Penalty::L1),
            Strategy::Ridge => Some(Penalty::L2),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Config(format!("alpha must be finite and >= 0, got {a}")));
            }
        }
        if !(self.bandwidth_rho > 0.0) {
            return Err(Error::Config("bandwidth_rho must be positive".into()));
        }
        if self.bootstrap_samples == 0 {
            return Err(Error::Config("bootstrap_samples must be >= 1".into()));
        }
        if self.positive_constraint && !self.strategy.is_regression() {
            return Err(Error::Config("positive_constraint applies to lasso/ridge only".into()));
        }
        Ok(())
    }
}

/// Model means at the target inputs: `M` rows × `N + 1` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub means: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl PredictionMatrix {
    pub fn new(means: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if means.nrows() != y.len() {
            return Err(Error::Config(format!(
                "{} prediction rows for {} observations",
                means.nrows(),
                y.len()
            )));
        }
        if means.ncols() == 0 {
            return Err(Error::Config("prediction matrix has no model columns".into()));
        }
        Ok(PredictionMatrix { means, y })
    }

    /// Builds the matrix from an ensemble whose target GP was fitted on
    /// `target`: source posterior means plus the target's leave-one-out means.
    pub fn from_ensemble(ens: &EnsembleModel, target: &ObservationDataset) -> Result<Self> {
        let tgt = ens
            .target()
            .ok_or_else(|| Error::State("ensemble has no target model".into()))?;
        let x = target.encoded(ens.space())?;
        let n = ens.n_sources();
        let loo = tgt.loo_means();
        let means = DMatrix::from_fn(x.len(), n + 1, |j, i| {
            if i < n {
                ens.sources()[i].mean_encoded(&x[j])
            } else {
                loo[j]
            }
        });
        Self::new(means, target.outputs.clone())
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_models(&self) -> usize {
        self.means.ncols()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.means.column(i).iter().copied().collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        PredictionMatrix {
            means: self.means.select_rows(rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
        }
    }

    fn target_only(&self) -> Vec<f64> {
        target_only_weights(self.n_models())
    }
}

pub fn target_only_weights(n_models: usize) -> Vec<f64> {
    let mut w = vec![0.0; n_models];
    w[n_models - 1] = 1.0;
    w
}

// ---------------------------------------------------------------------------
// Ranking losses

/// Number of ordered pairs `(j, k)` whose order under `pred` disagrees with
/// their order under `y`: `Σⱼ Σₖ 1[(predⱼ < predₖ) ⊕ (yⱼ < yₖ)]`.
pub fn discordant_pairs(pred: &[f64], y: &[f64]) -> u64 {
    assert_eq!(pred.len(), y.len(), "discordant_pairs needs equal lengths");
    let m = pred.len();
    let mut count = 0;
    for j in 0..m {
        for k in 0..m {
            if (pred[j] < pred[k]) != (y[j] < y[k]) {
                count += 1;
            }
        }
    }
    count
}

/// `samples` bootstrap resamples of `0..m`, each of size `m`.
pub fn bootstrap_indices(m: usize, samples: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = seed::rng(seed);
    (0..samples)
        .map(|_| (0..m).map(|_| rng.random_range(0..m)).collect())
        .collect()
}

/// Per-model discordance indicator matrices, reused across resamples.
struct Discordance {
    m: usize,
    /// `flags[i][a * m + b] = 1[(μᵢ(a) < μᵢ(b)) ⊕ (y_a < y_b)]`
    flags: Vec<Vec<u8>>,
}

impl Discordance {
    fn new(pm: &PredictionMatrix) -> Self {
        let m = pm.n_rows();
        let flags = (0..pm.n_models())
            .map(|i| {
                let col = pm.means.column(i);
                let mut f = vec![0u8; m * m];
                for a in 0..m {
                    for b in 0..m {
                        f[a * m + b] = u8::from((col[a] < col[b]) != (pm.y[a] < pm.y[b]));
                    }
                }
                f
            })
            .collect();
        Discordance { m, flags }
    }

    /// Discordant ordered pairs over a resample, given row multiplicities.
    fn loss(&self, model: usize, counts: &[u64], support: &[usize]) -> u64 {
        let f = &self.flags[model];
        let mut total = 0;
        for &a in support {
            let row = &f[a * self.m..(a + 1) * self.m];
            let mut inner = 0;
            for &b in support {
                inner += counts[b] * u64::from(row[b]);
            }
            total += counts[a] * inner;
        }
        total
    }
}

/// Ranking loss of every model on every resample: `losses[s][i]`.
pub fn ranking_losses(pm: &PredictionMatrix, samples: &[Vec<usize>]) -> Vec<Vec<u64>> {
    let disc = Discordance::new(pm);
    let mut counts = vec![0u64; pm.n_rows()];
    samples
        .iter()
        .map(|idx| {
            counts.iter_mut().for_each(|c| *c = 0);
            for &r in idx {
                counts[r] += 1;
            }
            let support: Vec<usize> = (0..counts.len()).filter(|&r| counts[r] > 0).collect();
            (0..pm.n_models()).map(|i| disc.loss(i, &counts, &support)).collect()
        })
        .collect()
}

/// Average over resamples of `1[i ∈ argmin] / |argmin|`.
pub fn rgpe_weights_from_losses(losses: &[Vec<u64>]) -> Vec<f64> {
    let n_models = losses.first().map_or(0, Vec::len);
    let mut w = vec![0.0; n_models];
    for sample in losses {
        let best = *sample.iter().min().expect("at least one model");
        let ties = sample.iter().filter(|&&l| l == best).count() as f64;
        for (wi, &l) in w.iter_mut().zip(sample) {
            if l == best {
                *wi += 1.0 / ties;
            }
        }
    }
    let s = losses.len() as f64;
    w.iter_mut().for_each(|v| *v /= s);
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgpeOutcome {
    pub weights: Vec<f64>,
    /// Per-resample losses, absent when too few points for ranking.
    pub losses: Option<Vec<Vec<u64>>>,
}

/// Ranking-weighted ensemble weights. Below three target points every
/// model gets `1 / (N + 1)`.
pub fn rgpe_weights(pm: &PredictionMatrix, cfg: &WeightingConfig, seed: u64) -> RgpeOutcome {
    let n = pm.n_models();
    if pm.n_rows() < 3 {
        return RgpeOutcome {
            weights: vec![1.0 / n as f64; n],
            losses: None,
        };
    }
    let samples = bootstrap_indices(pm.n_rows(), cfg.bootstrap_samples, seed);
    let losses = ranking_losses(pm, &samples);
    RgpeOutcome {
        weights: rgpe_weights_from_losses(&losses),
        losses: Some(losses),
    }
}

/// Epanechnikov kernel `¾(1 − t²)` on `t ≤ 1`, zero beyond.
pub fn epanechnikov(t: f64) -> f64 {
    if t.abs() <= 1.0 {
        0.75 * (1.0 - t * t)
    } else {
        0.0
    }
}

/// Fraction of discordant pairs, in `[0, 1]`.
pub fn discordant_fraction(pred: &[f64], y: &[f64]) -> f64 {
    let m = pred.len() as f64;
    discordant_pairs(pred, y) as f64 / (m * (m - 1.0))
}

/// Nadaraya-Watson weights from Epanechnikov kernels of each model's
/// ranking distance to the target observations.
pub fn tstr_weights(pm: &PredictionMatrix, cfg: &WeightingConfig) -> Vec<f64> {
    if pm.n_rows() < 2 {
        return pm.target_only();
    }
    let k: Vec<f64> = (0..pm.n_models())
        .map(|i| epanechnikov(discordant_fraction(&pm.column(i), &pm.y) / cfg.bandwidth_rho))
        .collect();
    let total: f64 = k.iter().sum();
    if total <= 0.0 {
        return pm.target_only();
    }
    k.into_iter().map(|v| v / total).collect()
}

// ---------------------------------------------------------------------------
// Regularised regression

/// Minimises `(1/M)‖y − Hw‖² + α·pen(w)` by coordinate descent on the Gram
/// form, projecting each coordinate onto `w ≥ 0` when `positive`.
pub fn fit_regularized(h: &DMatrix<f64>, y: &[f64], penalty: Penalty, alpha: f64, positive: bool) -> Vec<f64> {
    let m = h.nrows() as f64;
    let yv = DVector::from_column_slice(y);
    let gram = h.transpose() * h / m;
    let corr = h.transpose() * yv / m;
    solve_gram(&gram, &corr, penalty, alpha, positive, None)
}

fn solve_gram(
    gram: &DMatrix<f64>,
    corr: &DVector<f64>,
    penalty: Penalty,
    alpha: f64,
    positive: bool,
    warm: Option<&[f64]>,
) -> Vec<f64> {
    let p = gram.nrows();
    if penalty == Penalty::L2 && !positive {
        let mut a = gram.clone();
        for i in 0..p {
            a[(i, i)] += alpha;
        }
        if let Some(ch) = a.clone().cholesky() {
            return ch.solve(corr).iter().copied().collect();
        }
    }
    let mut w: Vec<f64> = warm.map_or_else(|| vec![0.0; p], <[f64]>::to_vec);
    if positive {
        w.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    const MAX_SWEEPS: usize = 5000;
    for _ in 0..MAX_SWEEPS {
        let mut max_delta: f64 = 0.0;
        let mut max_w: f64 = 0.0;
        for i in 0..p {
            let a = gram[(i, i)];
            let old = w[i];
            let mut b = corr[i];
            for j in 0..p {
                if j != i {
                    b -= gram[(i, j)] * w[j];
                }
            }
            // Per-coordinate objective: a·w² − 2b·w + pen(w).
            let mut new = match penalty {
                Penalty::L2 => {
                    if a + alpha > 0.0 {
                        b / (a + alpha)
                    } else {
                        0.0
                    }
                }
                Penalty::L1 => {
                    if a > 0.0 {
                        soft_threshold(b, alpha / 2.0) / a
                    } else {
                        0.0
                    }
                }
            };
            if positive && new < 0.0 {
                new = 0.0;
            }
            w[i] = new;
            max_delta = max_delta.max((new - old).abs());
            max_w = max_w.max(new.abs());
        }
        if max_delta <= 1e-10 * max_w.max(1.0) {
            break;
        }
    }
    w
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Mean of the regularised solution over bootstrap resamples of the rows.
pub fn bootstrap_regression(
    h: &DMatrix<f64>,
    y: &[f64],
    penalty: Penalty,
    alpha: f64,
    positive: bool,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    let m = h.nrows();
    let p = h.ncols();
    let full = fit_regularized(h, y, penalty, alpha, positive);
    let mut acc = vec![0.0; p];
    let mut counts = vec![0.0f64; m];
    for idx in bootstrap_indices(m, samples, seed) {
        counts.iter_mut().for_each(|c| *c = 0.0);
        for r in idx {
            counts[r] += 1.0;
        }
        let mut gram = DMatrix::zeros(p, p);
        let mut corr = DVector::zeros(p);
        for (r, &c) in counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = h.row(r);
            for a in 0..p {
                let ha = row[a] * c;
                corr[a] += ha * y[r];
                for b in 0..p {
                    gram[(a, b)] += ha * row[b];
                }
            }
        }
        gram /= m as f64;
        corr /= m as f64;
        let w = solve_gram(&gram, &corr, penalty, alpha, positive, Some(&full));
        for (a, v) in acc.iter_mut().zip(w) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|v| *v /= samples as f64);
    acc
}

/// Contiguous, unshuffled `k`-fold split of `0..m` (earlier folds take the
/// remainder). Returns `(train, test)` index pairs.
pub fn kfold_splits(m: usize, k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = m / k + usize::from(f < m % k);
        let test: Vec<usize> = (start..start + size).collect();
        let train: Vec<usize> = (0..m).filter(|i| *i < start || *i >= start + size).collect();
        out.push((train, test));
        start += size;
    }
    out
}

/// 20 log-spaced penalties spanning `[1e-4, 1e2]`.
pub fn alpha_grid() -> Vec<f64> {
    (0..20).map(|i| 10f64.powf(-4.0 + 6.0 * i as f64 / 19.0)).collect()
}

fn mse(h: &DMatrix<f64>, y: &[f64], w: &[f64]) -> f64 {
    let wv = DVector::from_column_slice(w);
    let pred = h * wv;
    pred.iter().zip(y).map(|(p, t)| (t - p) * (t - p)).sum::<f64>() / y.len() as f64
}

/// Cross-validated penalty: `(best α, its mean held-out MSE)`. Ties go to
/// the earlier (smaller) grid value.
pub fn cross_validate_alpha(
    h: &DMatrix<f64>,
    y: &[f64],
    penalty: Penalty,
    positive: bool,
    grid: &[f64],
    folds: usize,
) -> Option<(f64, f64)> {
    if folds < 2 || y.len() < 2 * folds {
        return None;
    }
    let splits = kfold_splits(y.len(), folds);
    let mut best: Option<(f64, f64)> = None;
    for &alpha in grid {
        let score = splits
            .iter()
            .map(|(train, test)| {
                let w = fit_regularized(
                    &h.select_rows(train),
                    &train.iter().map(|&r| y[r]).collect::<Vec<_>>(),
                    penalty,
                    alpha,
                    positive,
                );
                mse(&h.select_rows(test), &test.iter().map(|&r| y[r]).collect::<Vec<_>>(), &w)
            })
            .sum::<f64>()
            / folds as f64;
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((alpha, score));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionOutcome {
    pub weights: Vec<f64>,
    pub alpha: f64,
    /// Cross-validation MSE at `alpha`, when cross-validation ran.
    pub cv_mse: Option<f64>,
}

/// Lasso / ridge weights. The penalty comes from `cfg.alpha` if set, from
/// cross-validation once there are enough target points, and otherwise
/// from `prelearned`.
pub fn regression_weights(
    pm: &PredictionMatrix,
    cfg: &WeightingConfig,
    prelearned: Option<f64>,
    seed: u64,
) -> Result<RegressionOutcome> {
    let penalty = cfg
        .penalty()
        .ok_or_else(|| Error::Config(format!("{:?} is not a regression strategy", cfg.strategy)))?;
    let mut cv_mse = None;
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => {
            let cv = if pm.n_rows() >= MIN_CV_POINTS {
                cross_validate_alpha(&pm.means, &pm.y, penalty, cfg.positive_constraint, &alpha_grid(), CV_FOLDS)
            } else {
                None
            };
            match (cv, prelearned) {
                (Some((a, s)), _) => {
                    cv_mse = Some(s);
                    a
                }
                (None, Some(a)) => a,
                (None, None) => {
                    return Err(Error::Config(
                        "regression weighting needs alpha, a pre-learned alpha, or enough points to cross-validate".into(),
                    ))
                }
            }
        }
    };
    if pm.n_rows() < 2 {
        return Ok(RegressionOutcome {
            weights: pm.target_only(),
            alpha,
            cv_mse,
        });
    }
    let weights = bootstrap_regression(
        &pm.means,
        &pm.y,
        penalty,
        alpha,
        cfg.positive_constraint,
        cfg.bootstrap_samples,
        seed,
    );
    Ok(RegressionOutcome {
        weights,
        alpha,
        cv_mse,
    })
}

/// Median of the per-task cross-validated penalties, each task acting in
/// turn as pseudo-target with the other tasks' GPs as features.
pub fn prelearn_alpha(
    space: &SearchSpace,
    historic: &[ObservationDataset],
    cfg: &WeightingConfig,
    seed: u64,
) -> Result<f64> {
    if historic.len() < 2 {
        return Err(Error::Config("pre-learning alpha needs at least two historic tasks".into()));
    }
    let ens = EnsembleModel::construct(space, historic, seed)?;
    prelearn_alpha_with_models(space, ens.sources(), historic, cfg)
}

/// [`prelearn_alpha`] with already-fitted source models (`models[i]` fitted
/// on `historic[i]`).
pub fn prelearn_alpha_with_models<M: AsRef<GpSurrogate>>(
    space: &SearchSpace,
    models: &[M],
    historic: &[ObservationDataset],
    cfg: &WeightingConfig,
) -> Result<f64> {
    if historic.len() < 2 || models.len() != historic.len() {
        return Err(Error::Config("pre-learning alpha needs at least two historic tasks".into()));
    }
    let penalty = cfg.penalty().unwrap_or(Penalty::L1);
    let grid = alpha_grid();
    let mut best = Vec::with_capacity(historic.len());
    for (t, data) in historic.iter().enumerate() {
        let x = data.encoded(space)?;
        let others: Vec<&GpSurrogate> = models
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != t)
            .map(|(_, m)| m.as_ref())
            .collect();
        let h = DMatrix::from_fn(x.len(), others.len(), |j, i| others[i].mean_encoded(&x[j]));
        if let Some((a, _)) = cross_validate_alpha(&h, &data.outputs, penalty, cfg.positive_constraint, &grid, CV_FOLDS) {
            best.push(a);
        }
    }
    median(&mut best).ok_or_else(|| Error::Config("no historic task has enough points to cross-validate alpha".into()))
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

// ---------------------------------------------------------------------------
// SGD weights

/// Weights from per-sample SGD on `mean((y − Hw)²) + λ‖w‖²`, early-stopped
/// on a held-out split. Targets and features are divided by `std(y)` first
/// so the step size is scale-free. On divergence the learning rate is halved
/// and training restarted, at most three times.
pub fn wac_weights(pm: &PredictionMatrix, cfg: &WeightingConfig, seed: u64) -> Result<Vec<f64>> {
    let m = pm.n_rows();
    if m < 2 {
        return Ok(pm.target_only());
    }
    let p = pm.n_models();
    let mean_y = pm.y.iter().sum::<f64>() / m as f64;
    let sd = (pm.y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / m as f64).sqrt();
    let scale = if sd > 1e-12 { sd } else { mean_y.abs().max(1.0) };
    let h = &pm.means / scale;
    let y: Vec<f64> = pm.y.iter().map(|v| v / scale).collect();

    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let n_val = if m >= 5 && cfg.sgd.validation_fraction > 0.0 {
        ((cfg.sgd.validation_fraction * m as f64).round() as usize).clamp(1, m - 1)
    } else {
        0
    };
    let (val, train) = order.split_at(n_val);
    let mut train = train.to_vec();

    let mut lr = cfg.sgd.learning_rate;
    let lambda = cfg.sgd.l2_penalty;
    'restart: for _attempt in 0..=3 {
        let mut w = vec![1.0 / p as f64; p];
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut epoch_rng = seed::rng(seed::derive(seed, "epochs"));
        for _ in 0..cfg.sgd.epochs {
            train.shuffle(&mut epoch_rng);
            for &j in &train {
                let row = h.row(j);
                let pred: f64 = (0..p).map(|i| row[i] * w[i]).sum();
                let err = pred - y[j];
                for i in 0..p {
                    w[i] -= lr * (2.0 * err * row[i] + 2.0 * lambda * w[i]);
                }
            }
            let train_loss = rows_mse(&h, &y, &train, &w);
            if !train_loss.is_finite() || train_loss > 1e100 || w.iter().any(|v| !v.is_finite()) {
                lr *= 0.5;
                continue 'restart;
            }
            if n_val > 0 {
                let val_loss = rows_mse(&h, &y, val, &w);
                if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
                    best = Some((val_loss, w.clone()));
                }
            }
        }
        return Ok(best.map_or(w, |(_, bw)| bw));
    }
    Err(Error::Divergence(format!(
        "SGD weights diverged after 3 learning-rate halvings (last rate {lr})"
    )))
}

fn rows_mse(h: &DMatrix<f64>, y: &[f64], rows: &[usize], w: &[f64]) -> f64 {
    rows.iter()
        .map(|&j| {
            let pred: f64 = h.row(j).iter().zip(w).map(|(a, b)| a * b).sum();
            (pred - y[j]).powi(2)
        })
        .sum::<f64>()
        / rows.len().max(1) as f64
}

// ---------------------------------------------------------------------------

/// Output of one weighting step.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightOutcome {
    pub weights: Vec<f64>,
    pub variance_mode: VarianceMode,
    /// RGPE resample losses (input to weight dilution).
    pub ranking_losses: Option<Vec<Vec<u64>>>,
    /// Regression cross-validation MSE (input to mode switching).
    pub cv_mse: Option<f64>,
    pub alpha: Option<f64>,
}

/// Dispatches to the configured strategy, applying the small-sample rules:
/// below two target points only the target model is used (below three,
/// uniform weights for RGPE).
pub fn compute_weights(
    pm: &PredictionMatrix,
    cfg: &WeightingConfig,
    prelearned_alpha: Option<f64>,
    seed: u64,
) -> Result<WeightOutcome> {
    let mode = cfg.strategy.variance_mode();
    let mut out = WeightOutcome {
        weights: pm.target_only(),
        variance_mode: mode,
        ranking_losses: None,
        cv_mse: None,
        alpha: None,
    };
    match cfg.strategy {
        Strategy::TargetOnly => {}
        Strategy::Lasso | Strategy::Ridge => {
            if pm.n_rows() >= 2 {
                let r = regression_weights(pm, cfg, prelearned_alpha, seed)?;
                out.weights = r.weights;
                out.alpha = Some(r.alpha);
                out.cv_mse = r.cv_mse;
            }
        }
        Strategy::Rgpe => {
            let r = rgpe_weights(pm, cfg, seed);
            out.weights = r.weights;
            out.ranking_losses = r.losses;
        }
        Strategy::Tstr => out.weights = tstr_weights(pm, cfg),
        Strategy::Wac => out.weights = wac_weights(pm, cfg, seed)?,
    }
    Ok(out)
}
