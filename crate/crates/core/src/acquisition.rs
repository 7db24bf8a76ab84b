//! Lower-confidence-bound acquisition and its optimiser.
//!
//! The optimiser scores a Latin-hypercube batch, then hill-climbs from the
//! best few candidates with random neighbourhood moves in the encoded space.
//! Every scored point is kept; the lowest LCB wins and ties go to the point
//! scored first.

use std::collections::HashSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::search_space::{Configuration, SearchSpace};
use crate::seed;

/// Number of top random candidates used as local-search starts.
pub const LOCAL_STARTS: usize = 5;
const INITIAL_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    pub beta: f64,
    pub n_random_candidates: usize,
    pub n_local_steps: usize,
    pub local_neighbors: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            beta: 2.0,
            n_random_candidates: 2000,
            n_local_steps: 20,
            local_neighbors: 10,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if self.n_random_candidates == 0 || self.n_local_steps == 0 || self.local_neighbors == 0 {
            return Err(Error::Config("acquisition candidate counts must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn lcb(mean: f64, variance: f64, beta: f64) -> f64 {
    mean - beta * variance.max(0.0).sqrt()
}

/// Chosen point plus the acquisition value there.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub config: Configuration,
    pub lcb: f64,
    /// Number of distinct points scored.
    pub n_scored: usize,
}

/// Exact-match set over canonical encodings.
#[derive(Debug, Clone, Default)]
pub struct ExclusionSet {
    keys: HashSet<Vec<u64>>,
}

impl ExclusionSet {
    pub fn new(space: &SearchSpace, configs: &[Configuration]) -> Result<Self> {
        let mut set = ExclusionSet::default();
        for c in configs {
            set.insert(space, c)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, space: &SearchSpace, config: &Configuration) -> Result<()> {
        self.keys.insert(key(&space.encode(config)?));
        Ok(())
    }

    pub fn contains_encoded(&self, u: &[f64]) -> bool {
        self.keys.contains(&key(u))
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

fn key(u: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 must collide.
    u.iter().map(|v| (v + 0.0).to_bits()).collect()
}

struct Scorer<'a> {
    ens: &'a EnsembleModel,
    beta: f64,
    exclude: &'a ExclusionSet,
    seen: HashSet<Vec<u64>>,
    best: Option<(Configuration, f64)>,
}

impl Scorer<'_> {
    /// Scores `config` (encoded as `u`) unless already seen; returns its LCB
    /// (infinite if excluded).
    fn score(&mut self, config: &Configuration, u: &[f64]) -> Result<Option<f64>> {
        if !self.seen.insert(key(u)) {
            return Ok(None);
        }
        if self.exclude.contains_encoded(u) {
            return Ok(Some(f64::INFINITY));
        }
        let (m, v) = self.ens.predict_encoded(u)?;
        let a = lcb(m, v, self.beta);
        let a = if a.is_nan() { f64::INFINITY } else { a };
        if a.is_finite() && self.best.as_ref().is_none_or(|(_, b)| a < *b) {
            self.best = Some((config.clone(), a));
        }
        Ok(Some(a))
    }
}

/// Decodes `u` and re-encodes it, so integers and categories land on
/// admissible values.
fn canonical(space: &SearchSpace, u: &[f64]) -> (Configuration, Vec<f64>) {
    let config = space.decode(u);
    let u = space.encode(&config).expect("decoded configurations are always in the domain");
    (config, u)
}

/// Minimises the ensemble LCB over `space`, never returning an excluded
/// configuration.
pub fn optimize_acquisition(
    ens: &EnsembleModel,
    space: &SearchSpace,
    cfg: &AcquisitionConfig,
    exclude: &ExclusionSet,
    seed: u64,
) -> Result<Proposal> {
    cfg.validate()?;
    let mut scorer = Scorer {
        ens,
        beta: cfg.beta,
        exclude,
        seen: HashSet::new(),
        best: None,
    };
    let mut scored: Vec<(Vec<f64>, f64)> = Vec::with_capacity(cfg.n_random_candidates);
    for c in space.sample_latin_hypercube(cfg.n_random_candidates, seed::derive(seed, "acq_lhs"))? {
        let u = space.encode(&c)?;
        if let Some(a) = scorer.score(&c, &u)? {
            scored.push((u, a));
        }
    }

    // Local search from the best distinct random candidates (stable order).
    let mut order: Vec<usize> = (0..scored.len()).filter(|&i| scored[i].1.is_finite()).collect();
    order.sort_by(|&a, &b| scored[a].1.total_cmp(&scored[b].1));
    let mut rng = seed::stream(seed, "acq_local");
    let cats = space.categorical_mask();
    let n_categories: Vec<usize> = space
        .variables()
        .iter()
        .map(|v| match &v.domain {
            crate::search_space::Domain::Categorical { categories } => categories.len(),
            _ => 0,
        })
        .collect();
    for &start in order.iter().take(LOCAL_STARTS) {
        let (mut here, mut here_a) = scored[start].clone();
        let mut step = INITIAL_STEP;
        for _ in 0..cfg.n_local_steps {
            let mut best_move: Option<(Vec<f64>, f64)> = None;
            for _ in 0..cfg.local_neighbors {
                let mut v = here.clone();
                let flip = rng.random_range(0..v.len());
                for (d, x) in v.iter_mut().enumerate() {
                    if cats[d] {
                        if d == flip && n_categories[d] > 1 {
                            let shift = rng.random_range(1..n_categories[d]);
                            *x = ((*x as usize + shift) % n_categories[d]) as f64;
                        }
                    } else {
                        *x = (*x + step * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, 1.0);
                    }
                }
                let (c, v) = canonical(space, &v);
                if let Some(a) = scorer.score(&c, &v)? {
                    if a < here_a && best_move.as_ref().is_none_or(|(_, b)| a < *b) {
                        best_move = Some((v, a));
                    }
                }
            }
            match best_move {
                Some((v, a)) => {
                    here = v;
                    here_a = a;
                }
                None => step *= 0.5,
            }
        }
    }

    let n_scored = scorer.seen.len();
    let (config, a) = scorer
        .best
        .ok_or_else(|| Error::NoCandidate("every acquisition candidate is excluded".into()))?;
    Ok(Proposal {
        config,
        lcb: a,
        n_scored,
    })
}

/// Minimises the LCB over a finite candidate pool (e.g. the rows of a
/// tabulated benchmark), skipping excluded entries. Ties go to the lowest
/// pool index.
pub fn optimize_over_pool(
    ens: &EnsembleModel,
    space: &SearchSpace,
    pool: &[Configuration],
    beta: f64,
    exclude: &ExclusionSet,
) -> Result<Proposal> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in pool.iter().enumerate() {
        let u = space.encode(c)?;
        if exclude.contains_encoded(&u) {
            continue;
        }
        let (m, v) = ens.predict_encoded(&u)?;
        let a = lcb(m, v, beta);
        if best.is_none_or(|(_, b)| a < b) {
            best = Some((i, a));
        }
    }
    let (i, a) = best.ok_or_else(|| Error::NoCandidate("every pool entry is excluded".into()))?;
    Ok(Proposal {
        config: space.normalize(&pool[i])?,
        lcb: a,
        n_scored: pool.len(),
    })
}
