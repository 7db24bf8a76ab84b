//! One seeded optimisation run of a method on a target task, plus the
//! helpers that produce historic datasets and leave-one-task-out sweeps.
//!
//! Each iteration refits the target GP, computes ensemble weights, applies
//! the configured guard, minimises the LCB and evaluates the chosen point.
//! The evaluation budget includes the initial design.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{optimize_acquisition, optimize_over_pool, AcquisitionConfig, ExclusionSet};
use crate::benchmarks::BenchmarkTask;
use crate::dataset::ObservationDataset;
use crate::ensemble::{EnsembleModel, VarianceMode};
use crate::error::{Error, Result};
use crate::initialisation::{candidate_pool, random_init, warm_start, DEFAULT_RANDOM_POINTS, DEFAULT_WARM_START_POINTS};
use crate::search_space::{Configuration, SearchSpace};
use crate::seed;
use crate::surrogate::GpSurrogate;
use crate::transfer_guard::{apply_mask, kfold_mse, weight_dilution_mask, GuardMode, GuardState, DEFAULT_FOLDS};
use crate::weighting::{
    bootstrap_indices, compute_weights, prelearn_alpha_with_models, ranking_losses, target_only_weights,
    PredictionMatrix, Strategy, WeightingConfig,
};

pub const DEFAULT_BUDGET: usize = 100;
pub const DEFAULT_HISTORIC_EVALS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitMode {
    #[serde(rename = "random_10")]
    Random,
    #[serde(rename = "warm_start_2")]
    WarmStart,
}

impl InitMode {
    pub fn default_points(self) -> usize {
        match self {
            InitMode::Random => DEFAULT_RANDOM_POINTS,
            InitMode::WarmStart => DEFAULT_WARM_START_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardBo {
    StandardBo,
}

/// Either a single target GP or a weighted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weighting {
    Standard(StandardBo),
    Ensemble(WeightingConfig),
}

impl Weighting {
    pub fn standard() -> Self {
        Weighting::Standard(StandardBo::StandardBo)
    }

    pub fn config(&self) -> Option<&WeightingConfig> {
        match self {
            Weighting::Standard(_) => None,
            Weighting::Ensemble(c) => Some(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guard {
    #[default]
    None,
    WeightDilution,
    ModeSwitch,
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub id: String,
    pub init_mode: InitMode,
    /// Overrides the init mode's default point count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_points: Option<usize>,
    pub weighting: Weighting,
    #[serde(default)]
    pub guard: Guard,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

impl MethodSpec {
    pub fn new(id: impl Into<String>, init_mode: InitMode, weighting: Weighting) -> Self {
        MethodSpec {
            id: id.into(),
            init_mode,
            init_points: None,
            weighting,
            guard: Guard::None,
            acquisition: AcquisitionConfig::default(),
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn standard_bo(id: impl Into<String>) -> Self {
        Self::new(id, InitMode::Random, Weighting::standard())
    }

    pub fn n_init(&self) -> usize {
        self.init_points.unwrap_or_else(|| self.init_mode.default_points())
    }

    pub fn uses_sources(&self) -> bool {
        matches!(self.weighting, Weighting::Ensemble(_)) || self.init_mode == InitMode::WarmStart
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("method `{}`: {m}", self.id)));
        if self.id.is_empty() {
            return Err(Error::Config("method id must not be empty".into()));
        }
        if self.n_init() == 0 {
            return bad("needs at least one initial point".into());
        }
        if self.budget < self.n_init() {
            return bad(format!("budget {} below {} initial points", self.budget, self.n_init()));
        }
        self.acquisition.validate()?;
        match (&self.weighting, self.guard) {
            (Weighting::Standard(_), Guard::None) => {}
            (Weighting::Standard(_), g) => return bad(format!("standard BO cannot use guard {g:?}")),
            (Weighting::Ensemble(c), g) => {
                c.validate()?;
                let ok = match g {
                    Guard::None => true,
                    Guard::WeightDilution => matches!(c.strategy, Strategy::Rgpe | Strategy::Tstr),
                    Guard::ModeSwitch => c.strategy.is_regression(),
                };
                if !ok {
                    return bad(format!("guard {g:?} is incompatible with {:?}", c.strategy));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Search,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub phase: Phase,
    pub config: Configuration,
    pub value: f64,
    pub incumbent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard_mode: Option<GuardMode>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub mode_switched: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub task: String,
    pub seed: u64,
    pub budget: usize,
    /// Historic datasets used as sources, in ensemble order.
    pub sources: Vec<String>,
    pub iterations: Vec<IterationRecord>,
    /// Set when the run stopped early because an evaluation failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn key(&self) -> String {
        cell_key(&self.method, &self.task, self.seed)
    }

    pub fn incumbents(&self) -> Vec<f64> {
        self.iterations.iter().map(|i| i.incumbent).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none() && self.iterations.len() == self.budget
    }

    /// Incumbent after `n` evaluations (1-based), held at the last value
    /// for short records.
    pub fn incumbent_at(&self, n: usize) -> Option<f64> {
        let i = n.min(self.iterations.len()).checked_sub(1)?;
        Some(self.iterations[i].incumbent)
    }
}

pub fn cell_key(method: &str, task: &str, seed: u64) -> String {
    format!("{method}__{task}__{seed}")
}

/// Per-iteration wall-clock seconds, kept apart from the record so records
/// stay byte-reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub iteration_seconds: Vec<f64>,
}

/// Source models for a list of historic datasets. Each model's restart
/// seed depends only on `seed` and its `ids` entry, so one fit can be shared
/// by every run that uses the dataset.
pub fn fit_source_models(
    space: &SearchSpace,
    historic: &[ObservationDataset],
    seed: u64,
) -> Result<Vec<Arc<GpSurrogate>>> {
    historic
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if d.is_empty() {
                return Err(Error::SourceFit {
                    index: i,
                    source: Box::new(Error::Config("empty dataset".into())),
                });
            }
            GpSurrogate::fit(space, d, seed::derive(seed, &format!("source_gp/{}", d.task_id)))
                .map(Arc::new)
                .map_err(|e| Error::SourceFit {
                    index: i,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Runs `method` on `target` with source models fitted from `historic`
/// under the run seed.
pub fn run_bo(method: &MethodSpec, target: &BenchmarkTask, historic: &[ObservationDataset], seed: u64) -> Result<RunRecord> {
    let models = if method.uses_sources() {
        fit_source_models(&target.space, historic, seed)?
    } else {
        Vec::new()
    };
    run_bo_with_models(method, target, historic, &models, seed).map(|(r, _)| r)
}

/// [`run_bo`] with pre-fitted source models (`models[i]` fitted on
/// `historic[i]`). Also returns per-iteration timings.
pub fn run_bo_with_models(
    method: &MethodSpec,
    target: &BenchmarkTask,
    historic: &[ObservationDataset],
    models: &[Arc<GpSurrogate>],
    seed: u64,
) -> Result<(RunRecord, RunTiming)> {
    method.validate()?;
    let space = &target.space;
    let uses_sources = method.uses_sources();
    if uses_sources && (historic.is_empty() || models.len() != historic.len()) {
        return Err(Error::Config(format!(
            "method `{}` needs historic datasets with matching source models",
            method.id
        )));
    }
    let mut record = RunRecord {
        method: method.id.clone(),
        task: target.id.clone(),
        seed,
        budget: method.budget,
        sources: if uses_sources { historic.iter().map(|d| d.task_id.clone()).collect() } else { Vec::new() },
        iterations: Vec::with_capacity(method.budget),
        failure: None,
    };
    let mut timing = RunTiming::default();
    let sources = EnsembleModel::from_sources(space, if uses_sources { models.to_vec() } else { Vec::new() });

    let started = Instant::now();
    let init = match method.init_mode {
        InitMode::Random => random_init(space, method.n_init(), seed::derive(seed, "init"))?,
        InitMode::WarmStart => warm_start(&sources, &candidate_pool(historic), method.n_init())?.points,
    };
    let mut data = ObservationDataset::new(target.id.clone());
    let mut exclude = ExclusionSet::default();
    let init_seconds = started.elapsed().as_secs_f64() / init.len() as f64;
    for x in init {
        let t = data.len() as u64;
        let y = match target.evaluate_noisy(&x, seed::derive_indexed(seed, "noise", t)) {
            Ok(y) => y,
            Err(e) => {
                record.failure = Some(e.to_string());
                return Ok((record, timing));
            }
        };
        push(&mut record, &mut data, &mut exclude, space, x, y, Phase::Init, None)?;
        timing.iteration_seconds.push(init_seconds);
    }

    let weighting = method.weighting.config().cloned();
    let mut guard_state = GuardState::default();
    for y in &data.outputs {
        guard_state.record_observation(*y);
    }
    let mut guard_rng = seed::stream(seed, "guard");
    let prelearned = match &weighting {
        Some(c) if c.strategy.is_regression() && c.alpha.is_none() && historic.len() >= 2 => {
            prelearn_alpha_with_models(space, models, historic, c).ok()
        }
        _ => None,
    };

    while data.len() < method.budget {
        let started = Instant::now();
        let t = data.len() as u64;
        let gp = GpSurrogate::fit(space, &data, seed::derive_indexed(seed, "target_gp", t))?;
        let ens = sources.with_target(Arc::new(gp));
        let mut step = StepInfo::default();
        let ens = match &weighting {
            None => ens.with_weights(vec![1.0], VarianceMode::TargetOnly)?,
            Some(cfg) => {
                let pm = PredictionMatrix::from_ensemble(&ens, &data)?;
                let wseed = seed::derive_indexed(seed, "weights", t);
                let (weights, mode) = ensemble_weights(
                    cfg,
                    method,
                    &pm,
                    prelearned,
                    wseed,
                    &mut guard_state,
                    &mut guard_rng,
                    &mut step,
                )?;
                step.weights = Some(weights.clone());
                ens.with_weights(weights, mode)?
            }
        };
        let aseed = seed::derive_indexed(seed, "acquisition", t);
        let proposal = match target.candidate_pool() {
            Some(pool) => optimize_over_pool(&ens, space, pool, method.acquisition.beta, &exclude)?,
            None => optimize_acquisition(&ens, space, &method.acquisition, &exclude, aseed)?,
        };
        let y = match target.evaluate_noisy(&proposal.config, seed::derive_indexed(seed, "noise", t)) {
            Ok(y) => y,
            Err(e) => {
                record.failure = Some(e.to_string());
                return Ok((record, timing));
            }
        };
        push(&mut record, &mut data, &mut exclude, space, proposal.config, y, Phase::Search, Some(step))?;
        guard_state.record_observation(y);
        timing.iteration_seconds.push(started.elapsed().as_secs_f64());
    }
    Ok((record, timing))
}

#[derive(Debug, Default)]
struct StepInfo {
    weights: Option<Vec<f64>>,
    guard_mode: Option<GuardMode>,
    mode_switched: bool,
    alpha: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn ensemble_weights(
    cfg: &WeightingConfig,
    method: &MethodSpec,
    pm: &PredictionMatrix,
    prelearned: Option<f64>,
    wseed: u64,
    guard_state: &mut GuardState,
    guard_rng: &mut seed::Rng,
    step: &mut StepInfo,
) -> Result<(Vec<f64>, VarianceMode)> {
    let mode = cfg.strategy.variance_mode();
    match method.guard {
        Guard::None => {
            let out = compute_weights(pm, cfg, prelearned, wseed)?;
            step.alpha = out.alpha;
            Ok((out.weights, out.variance_mode))
        }
        Guard::WeightDilution => {
            let out = compute_weights(pm, cfg, prelearned, wseed)?;
            let losses = match out.ranking_losses {
                Some(l) => Some(l),
                None if pm.n_rows() >= 2 => {
                    let samples = bootstrap_indices(pm.n_rows(), cfg.bootstrap_samples, seed::derive(wseed, "dilution"));
                    Some(ranking_losses(pm, &samples))
                }
                None => None,
            };
            let weights = match losses {
                Some(l) => {
                    let keep = weight_dilution_mask(&l, pm.n_rows(), method.budget, guard_rng);
                    apply_mask(&out.weights, &keep)
                }
                None => out.weights,
            };
            Ok((weights, out.variance_mode))
        }
        Guard::ModeSwitch => {
            step.mode_switched = guard_state.maybe_switch(guard_rng);
            step.guard_mode = Some(guard_state.mode);
            let n_models = pm.n_models();
            let (weights, mse) = match guard_state.mode {
                GuardMode::TargetOnly => {
                    let mse = kfold_mse(pm, DEFAULT_FOLDS, |_| Ok(target_only_weights(n_models)))?;
                    (target_only_weights(n_models), mse)
                }
                GuardMode::Ensemble => {
                    let out = compute_weights(pm, cfg, prelearned, wseed)?;
                    step.alpha = out.alpha;
                    let fold_seed = seed::derive(wseed, "kfold");
                    let mse = kfold_mse(pm, DEFAULT_FOLDS, |train| {
                        compute_weights(train, cfg, prelearned.or(out.alpha), fold_seed).map(|o| o.weights)
                    })?;
                    (out.weights, mse)
                }
            };
            if let Some(m) = mse {
                guard_state.record_mse(m);
            }
            Ok((weights, mode))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn push(
    record: &mut RunRecord,
    data: &mut ObservationDataset,
    exclude: &mut ExclusionSet,
    space: &SearchSpace,
    x: Configuration,
    y: f64,
    phase: Phase,
    step: Option<StepInfo>,
) -> Result<()> {
    let incumbent = record.iterations.last().map_or(y, |last| last.incumbent.min(y));
    exclude.insert(space, &x)?;
    let step = step.unwrap_or_default();
    record.iterations.push(IterationRecord {
        phase,
        config: x.clone(),
        value: y,
        incumbent,
        weights: step.weights,
        guard_mode: step.guard_mode,
        mode_switched: step.mode_switched,
        alpha: step.alpha,
    });
    data.push(x, y);
    Ok(())
}

/// Historic datasets from standard BO with random initialisation:
/// `result[task][k]` holds the run on `tasks[task]` with seed `seeds[k]`.
pub fn generate_historic(tasks: &[BenchmarkTask], n_evals: usize, seeds: &[u64]) -> Result<Vec<Vec<ObservationDataset>>> {
    let mut method = MethodSpec::standard_bo("historic");
    method.budget = n_evals;
    method.validate()?;
    tasks
        .iter()
        .map(|task| seeds.iter().map(|&s| historic_run(&method, task, s)).collect())
        .collect()
}

/// One historic dataset: the full `(x, y)` trace of a standard-BO run.
pub fn historic_run(method: &MethodSpec, task: &BenchmarkTask, seed: u64) -> Result<ObservationDataset> {
    let record = run_bo(method, task, &[], seed)?;
    if let Some(f) = record.failure {
        return Err(Error::Evaluation(format!("historic run on `{}` failed: {f}", task.id)));
    }
    ObservationDataset::from_pairs(
        task.id.clone(),
        record.iterations.iter().map(|i| i.config.clone()).collect(),
        record.iterations.iter().map(|i| i.value).collect(),
    )
}

/// Every task in turn as target, the other tasks' datasets as sources.
/// `historic[i]` must belong to `family[i]`.
pub fn leave_one_task_out(
    family: &[BenchmarkTask],
    historic: &[ObservationDataset],
    method: &MethodSpec,
    seeds: &[u64],
    model_seed: u64,
) -> Result<Vec<RunRecord>> {
    if family.len() < 2 || historic.len() != family.len() {
        return Err(Error::Config("leave-one-task-out needs >= 2 tasks with one dataset each".into()));
    }
    let models = if method.uses_sources() {
        fit_source_models(&family[0].space, historic, model_seed)?
    } else {
        Vec::new()
    };
    let mut out = Vec::with_capacity(family.len() * seeds.len());
    for (i, target) in family.iter().enumerate() {
        let (h, m) = sources_excluding(historic, &models, i);
        for &s in seeds {
            out.push(run_bo_with_models(method, target, &h, &m, s)?.0);
        }
    }
    Ok(out)
}

/// Datasets and models with entry `i` removed (models may be empty).
pub fn sources_excluding(
    historic: &[ObservationDataset],
    models: &[Arc<GpSurrogate>],
    i: usize,
) -> (Vec<ObservationDataset>, Vec<Arc<GpSurrogate>>) {
    let h = historic.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, d)| d.clone()).collect();
    let m = models.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, m)| m.clone()).collect();
    (h, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{synthetic_family, Objective, SyntheticKind};
    use crate::search_space::{Value, Variable};

    fn quick(mut m: MethodSpec, budget: usize) -> MethodSpec {
        m.budget = budget;
        m.acquisition.n_random_candidates = 200;
        m.acquisition.n_local_steps = 5;
        m
    }

    fn family() -> Vec<BenchmarkTask> {
        synthetic_family(SyntheticKind::ShiftedQuadratic, 3, 1.0, 2).unwrap()
    }

    #[test]
    fn method_validation() {
        let mut m = MethodSpec::standard_bo("bo");
        m.validate().unwrap();
        m.guard = Guard::ModeSwitch;
        assert!(m.validate().is_err());
        let mut m = MethodSpec::new("r", InitMode::Random, Weighting::Ensemble(WeightingConfig::new(Strategy::Rgpe)));
        m.guard = Guard::ModeSwitch;
        assert!(m.validate().is_err());
        m.guard = Guard::WeightDilution;
        m.validate().unwrap();
        m.budget = 5;
        assert!(m.validate().is_err());
    }

    #[test]
    fn method_json_forms() {
        let m: MethodSpec = serde_json::from_str(
            r#"{"id": "bo", "init_mode": "random_10", "weighting": "standard_bo"}"#,
        )
        .unwrap();
        assert_eq!(m.weighting, Weighting::standard());
        assert_eq!(m.budget, DEFAULT_BUDGET);
        let m: MethodSpec = serde_json::from_str(
            r#"{"id": "lagpe+", "init_mode": "warm_start_2", "guard": "mode_switch",
                "weighting": {"strategy": "lasso", "positive_constraint": true}}"#,
        )
        .unwrap();
        let cfg = m.weighting.config().unwrap();
        assert!(cfg.positive_constraint);
        assert_eq!(cfg.bootstrap_samples, 1000);
        assert_eq!(m.n_init(), 2);
        let back: MethodSpec = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn standard_bo_finds_quadratic_minimum() {
        let space = SearchSpace::new(vec![Variable::continuous("x", 0.0, 1.0)]).unwrap();
        let task = BenchmarkTask::with_space("q", space, Objective::Quadratic { center: vec![0.3] });
        let rec = run_bo(&quick(MethodSpec::standard_bo("bo"), 30), &task, &[], 4).unwrap();
        assert_eq!(rec.iterations.len(), 30);
        let best = rec.iterations.iter().min_by(|a, b| a.value.total_cmp(&b.value)).unwrap();
        let Value::Real(x) = best.config.0[0] else { panic!() };
        assert!((x - 0.3).abs() < 0.05, "x = {x}");
        assert!(rec.incumbents().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn runs_are_deterministic_and_warm_start_uses_history() {
        let fam = family();
        let historic: Vec<ObservationDataset> = generate_historic(&fam[1..], 12, &[0])
            .unwrap()
            .into_iter()
            .map(|mut v| v.remove(0))
            .collect();
        assert!(historic.iter().all(|d| d.len() == 12));
        let mut cfg = WeightingConfig::new(Strategy::Rgpe);
        cfg.bootstrap_samples = 100;
        let m = quick(MethodSpec::new("rgpe", InitMode::WarmStart, Weighting::Ensemble(cfg)), 8);
        let a = run_bo(&m, &fam[0], &historic, 1).unwrap();
        assert_eq!(a, run_bo(&m, &fam[0], &historic, 1).unwrap());
        let pool = candidate_pool(&historic);
        for it in &a.iterations[..2] {
            assert!(pool.contains(&it.config));
            assert_eq!(it.phase, Phase::Init);
        }
        let w = a.iterations[2].weights.as_ref().unwrap();
        assert_eq!(w.len(), 3);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn guarded_runs_complete() {
        let fam = family();
        let historic: Vec<ObservationDataset> = generate_historic(&fam[1..], 10, &[3])
            .unwrap()
            .into_iter()
            .map(|mut v| v.remove(0))
            .collect();
        let mut lasso = WeightingConfig::new(Strategy::Lasso).positive(true);
        lasso.bootstrap_samples = 50;
        let mut m = quick(MethodSpec::new("lagpe", InitMode::Random, Weighting::Ensemble(lasso)), 14);
        m.init_points = Some(3);
        m.guard = Guard::ModeSwitch;
        let r = run_bo(&m, &fam[0], &historic, 0).unwrap();
        assert!(r.is_complete());
        assert!(r.iterations[3..].iter().all(|i| i.guard_mode.is_some()));
        for it in &r.iterations[3..] {
            assert!(it.weights.as_ref().unwrap().iter().all(|w| *w >= 0.0));
        }

        let mut tstr = WeightingConfig::new(Strategy::Tstr);
        tstr.bootstrap_samples = 50;
        let mut m = quick(MethodSpec::new("tstr", InitMode::Random, Weighting::Ensemble(tstr)), 8);
        m.init_points = Some(3);
        m.guard = Guard::WeightDilution;
        let r = run_bo(&m, &fam[0], &historic, 0).unwrap();
        assert!(r.is_complete());
    }

    #[test]
    fn loto_protocol() {
        let fam = family();
        let historic: Vec<ObservationDataset> = generate_historic(&fam, 10, &[0])
            .unwrap()
            .into_iter()
            .map(|mut v| v.remove(0))
            .collect();
        let mut cfg = WeightingConfig::new(Strategy::Rgpe);
        cfg.bootstrap_samples = 20;
        let mut m = quick(MethodSpec::new("rgpe", InitMode::Random, Weighting::Ensemble(cfg)), 5);
        m.init_points = Some(3);
        let recs = leave_one_task_out(&fam, &historic, &m, &[1, 2], 0).unwrap();
        assert_eq!(recs.len(), 6);
        let mut keys: Vec<String> = recs.iter().map(RunRecord::key).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 6);
        for r in &recs {
            assert!(!r.sources.contains(&r.task));
            assert_eq!(r.sources.len(), 2);
        }
    }

    #[test]
    fn failing_evaluation_flags_partial_record() {
        let space = SearchSpace::new(vec![Variable::continuous("x", 0.0, 1.0)]).unwrap();
        let mut task = BenchmarkTask::with_space("q", space, Objective::Quadratic { center: vec![0.3] });
        task.noise_std = f64::NAN;
        let r = run_bo(&quick(MethodSpec::standard_bo("bo"), 12), &task, &[], 0).unwrap();
        assert!(r.failure.is_some());
        assert!(!r.is_complete());
    }
}
