//! Initial designs for a target run: Latin-hypercube points, or greedy
//! warm-start points picked from the historic inputs using the source GPs.

use std::collections::HashSet;

use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::search_space::{Configuration, SearchSpace};

pub const DEFAULT_RANDOM_POINTS: usize = 10;
pub const DEFAULT_WARM_START_POINTS: usize = 2;

pub fn random_init(space: &SearchSpace, n: usize, seed: u64) -> Result<Vec<Configuration>> {
    space.sample_latin_hypercube(n, seed)
}

/// Warm-start points with the score each was selected at.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub points: Vec<Configuration>,
    pub scores: Vec<f64>,
}

/// Greedy portfolio selection over the source models.
///
/// Each model `q` keeps the best mean it predicts over the points selected so
/// far. A candidate's score is the average over models of
/// `min(μ_q(x), best_q)`, and each round appends the lowest-scoring
/// unselected candidate. Duplicate candidates are collapsed first; ties go
/// to the earliest candidate.
pub fn warm_start(ens: &EnsembleModel, candidates: &[Configuration], n: usize) -> Result<WarmStart> {
    if ens.n_sources() == 0 {
        return Err(Error::Config("warm start needs at least one source model".into()));
    }
    let space = ens.space();
    let mut seen = HashSet::new();
    let mut pool = Vec::new();
    let mut means = Vec::new();
    for c in candidates {
        let u = space.encode(c)?;
        if seen.insert(u.iter().map(|v| (v + 0.0).to_bits()).collect::<Vec<_>>()) {
            means.push(ens.source_means_encoded(&u));
            pool.push(space.normalize(c)?);
        }
    }
    if n > pool.len() {
        return Err(Error::Config(format!(
            "requested {n} warm-start points from {} distinct candidates",
            pool.len()
        )));
    }
    let n_models = ens.n_sources();
    let mut best = vec![f64::INFINITY; n_models];
    let mut taken = vec![false; pool.len()];
    let mut out = WarmStart {
        points: Vec::with_capacity(n),
        scores: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let mut choice: Option<(usize, f64)> = None;
        for (i, mu) in means.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let score = mu.iter().zip(&best).map(|(m, b)| m.min(*b)).sum::<f64>() / n_models as f64;
            if choice.is_none_or(|(_, s)| score < s) {
                choice = Some((i, score));
            }
        }
        let (i, score) = choice.expect("pool has at least n entries");
        taken[i] = true;
        for (b, m) in best.iter_mut().zip(&means[i]) {
            *b = b.min(*m);
        }
        out.points.push(pool[i].clone());
        out.scores.push(score);
    }
    Ok(out)
}

/// Union of the historic inputs, in dataset order.
pub fn candidate_pool(historic: &[crate::dataset::ObservationDataset]) -> Vec<Configuration> {
    historic.iter().flat_map(|d| d.inputs.iter().cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ObservationDataset;
    use crate::search_space::{Value, Variable};
    use crate::surrogate::{GpSurrogate, KernelHyperparams};
    use std::sync::Arc;

    fn line() -> SearchSpace {
        SearchSpace::new(vec![Variable::continuous("x", 0.0, 1.0)]).unwrap()
    }

    /// A GP that interpolates `f` on a dense grid, so its mean at grid
    /// points is `f` to high accuracy.
    fn interpolant(space: &SearchSpace, f: impl Fn(f64) -> f64) -> Arc<GpSurrogate> {
        let xs: Vec<f64> = (0..6).map(|i| i as f64 / 5.0).collect();
        let data = ObservationDataset::from_pairs(
            "s",
            xs.iter().map(|&x| Configuration::reals(&[x])).collect(),
            xs.iter().map(|&x| f(x)).collect(),
        )
        .unwrap();
        let hp = KernelHyperparams {
            signal_variance: 1.0,
            lengthscales: vec![0.3],
            hamming_lengthscales: vec![],
            noise_variance: 1e-8,
        };
        Arc::new(GpSurrogate::with_hyperparams(space, &data, hp).unwrap())
    }

    #[test]
    fn random_init_counts() {
        let space = line();
        let a = random_init(&space, DEFAULT_RANDOM_POINTS, 4).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a, random_init(&space, 10, 4).unwrap());
    }

    #[test]
    fn single_model_enumeration() {
        let space = line();
        let gp = interpolant(&space, |x| x);
        let a = Configuration::reals(&[0.2]);
        let b = Configuration::reals(&[0.6]);
        let ens = EnsembleModel::from_sources(&space, vec![gp.clone()]);
        let w = warm_start(&ens, &[b.clone(), a.clone()], 1).unwrap();
        assert_eq!(w.points, vec![a.clone()]);
        let w = warm_start(&ens, &[b.clone(), a.clone()], 2).unwrap();
        assert_eq!(w.points, vec![a.clone(), b.clone()]);
        assert!(warm_start(&ens, &[a.clone(), a.clone(), b], 3).is_err());
    }

    #[test]
    fn portfolio_covers_disagreeing_models() {
        let space = line();
        let left = interpolant(&space, |x| (x - 0.25).powi(2));
        let right = interpolant(&space, |x| (x - 0.8).powi(2));
        let ens = EnsembleModel::from_sources(&space, vec![left, right]);
        let cands: Vec<Configuration> = [0.2, 0.4, 0.6, 0.8].iter().map(|&x| Configuration::reals(&[x])).collect();
        let w = warm_start(&ens, &cands, 2).unwrap();
        // Round one, plain mean: 0.18, 0.09, 0.08, 0.15 -> 0.6.
        assert_eq!(w.points[0], cands[2]);
        // Round two, bests (0.1225, 0.04): 0.021, 0.031, 0.061 -> 0.2.
        assert_eq!(w.points[1], cands[0]);
        assert!(w.scores[1] <= w.scores[0]);
    }

    #[test]
    fn identical_means_pick_first_index() {
        let space = SearchSpace::new(vec![Variable::categorical("c", ["a", "b", "c"])]).unwrap();
        let data = ObservationDataset::from_pairs("s", vec![Configuration(vec![Value::Category("a".into())])], vec![1.0]).unwrap();
        let flat = GpSurrogate::with_hyperparams(&space, &data, KernelHyperparams::default_for(&space)).unwrap();
        let ens = EnsembleModel::from_sources(&space, vec![Arc::new(flat)]);
        let cands: Vec<Configuration> = ["b", "c"]
            .iter()
            .map(|k| Configuration(vec![Value::Category((*k).into())]))
            .collect();
        let w = warm_start(&ens, &cands, 2).unwrap();
        assert_eq!(w.points, cands);
    }
}
