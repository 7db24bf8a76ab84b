//! Ensemble of source-task GPs plus a target-task GP.
//!
//! Prediction at `x`:
//! mean `Σ wᵢ μᵢ(x) + w_target μ_target(x)`; variance either the target
//! GP's alone or, for strategies that combine uncertainties, `Σ wᵢ σᵢ²(x)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::ObservationDataset;
use crate::error::{Error, Result};
use crate::search_space::{Configuration, SearchSpace};
use crate::seed;
use crate::surrogate::GpSurrogate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    TargetOnly,
    Weighted,
}

#[derive(Debug, Clone)]
pub struct EnsembleModel {
    space: SearchSpace,
    sources: Vec<Arc<GpSurrogate>>,
    target: Option<Arc<GpSurrogate>>,
    weights: Option<Vec<f64>>,
    variance_mode: VarianceMode,
}

impl EnsembleModel {
    /// Fits one GP per historic dataset. The target model is absent and the
    /// weights unset until [`update`](Self::update) and
    /// [`with_weights`](Self::with_weights) are called.
    pub fn construct(space: &SearchSpace, historic: &[ObservationDataset], seed: u64) -> Result<Self> {
        if historic.is_empty() {
            return Err(Error::Config("ensemble needs at least one historic dataset".into()));
        }
        let sources = historic
            .iter()
            .enumerate()
            .map(|(i, data)| {
                if data.is_empty() {
                    return Err(Error::SourceFit {
                        index: i,
                        source: Box::new(Error::Config("empty dataset".into())),
                    });
                }
                GpSurrogate::fit(space, data, seed::derive_indexed(seed, "source_gp", i as u64))
                    .map(Arc::new)
                    .map_err(|e| Error::SourceFit {
                        index: i,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_sources(space, sources))
    }

    pub fn from_sources(space: &SearchSpace, sources: Vec<Arc<GpSurrogate>>) -> Self {
        EnsembleModel {
            space: space.clone(),
            sources,
            target: None,
            weights: None,
            variance_mode: VarianceMode::TargetOnly,
        }
    }

    /// Returns a new ensemble whose target GP is refitted on `target_data`.
    /// Source models are shared, never refitted; weights are cleared.
    pub fn update(&self, target_data: &ObservationDataset, seed: u64) -> Result<Self> {
        let target = GpSurrogate::fit(&self.space, target_data, seed)?;
        Ok(self.with_target(Arc::new(target)))
    }

    pub fn with_target(&self, target: Arc<GpSurrogate>) -> Self {
        EnsembleModel {
            space: self.space.clone(),
            sources: self.sources.clone(),
            target: Some(target),
            weights: None,
            variance_mode: self.variance_mode,
        }
    }

    /// Installs a weight vector ordered `(w_1, …, w_N, w_target)`.
    pub fn with_weights(mut self, weights: Vec<f64>, mode: VarianceMode) -> Result<Self> {
        if weights.len() != self.n_models() {
            return Err(Error::State(format!(
                "{} weights for {} models",
                weights.len(),
                self.n_models()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::State("weights must be finite".into()));
        }
        self.weights = Some(weights);
        self.variance_mode = mode;
        Ok(self)
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn sources(&self) -> &[Arc<GpSurrogate>] {
        &self.sources
    }

    pub fn target(&self) -> Option<&Arc<GpSurrogate>> {
        self.target.as_ref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn variance_mode(&self) -> VarianceMode {
        self.variance_mode
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_models(&self) -> usize {
        self.sources.len() + usize::from(self.target.is_some())
    }

    /// Source-model posterior means at an encoded point.
    pub fn source_means_encoded(&self, u: &[f64]) -> Vec<f64> {
        self.sources.iter().map(|m| m.mean_encoded(u)).collect()
    }

    pub fn predict(&self, x: &Configuration) -> Result<(f64, f64)> {
        self.predict_encoded(&self.space.encode(x)?)
    }

    pub fn predict_encoded(&self, u: &[f64]) -> Result<(f64, f64)> {
        let weights = self
            .weights
            .as_ref()
            .ok_or_else(|| Error::State("ensemble weights are unset".into()))?;
        let target = self
            .target
            .as_ref()
            .ok_or_else(|| Error::State("ensemble has no target model".into()))?;
        let n = self.sources.len();
        let mut mean = 0.0;
        let mut weighted_var = 0.0;
        for (model, &w) in self.sources.iter().zip(&weights[..n]) {
            if w == 0.0 {
                continue;
            }
            match self.variance_mode {
                VarianceMode::TargetOnly => mean += w * model.mean_encoded(u),
                VarianceMode::Weighted => {
                    let (m, v) = model.predict_encoded(u);
                    mean += w * m;
                    weighted_var += w * v;
                }
            }
        }
        let (mt, vt) = target.predict_encoded(u);
        let wt = weights[n];
        mean += wt * mt;
        let variance = match self.variance_mode {
            VarianceMode::TargetOnly => vt,
            VarianceMode::Weighted => (weighted_var + wt * vt).max(0.0),
        };
        Ok((mean, variance))
    }
}

/// Free-function form of [`EnsembleModel::construct`].
pub fn construct_ensemble(space: &SearchSpace, historic: &[ObservationDataset], seed: u64) -> Result<EnsembleModel> {
    EnsembleModel::construct(space, historic, seed)
}

/// Free-function form of [`EnsembleModel::update`].
pub fn update_ensemble(ens: &EnsembleModel, target_data: &ObservationDataset, seed: u64) -> Result<EnsembleModel> {
    ens.update(target_data, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::Variable;
    use crate::surrogate::KernelHyperparams;

    fn line() -> SearchSpace {
        SearchSpace::new(vec![Variable::continuous("x", 0.0, 1.0)]).unwrap()
    }

    fn data(id: &str, xs: &[f64], f: impl Fn(f64) -> f64) -> ObservationDataset {
        ObservationDataset::from_pairs(
            id,
            xs.iter().map(|&x| Configuration::reals(&[x])).collect(),
            xs.iter().map(|&x| f(x)).collect(),
        )
        .unwrap()
    }

    fn historic() -> Vec<ObservationDataset> {
        let xs = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        vec![
            data("a", &xs, |x| (x - 0.3).powi(2)),
            data("b", &xs, |x| (x - 0.5).powi(2)),
            data("c", &xs, |x| (x - 0.7).powi(2)),
        ]
    }

    #[test]
    fn construction_and_update_counts() {
        let space = line();
        let ens = construct_ensemble(&space, &historic(), 3).unwrap();
        assert_eq!(ens.n_sources(), 3);
        assert!(ens.target().is_none());
        assert!(ens.weights().is_none());
        assert!(construct_ensemble(&space, &[], 3).is_err());

        let target = data("t", &[0.1, 0.9], |x| x);
        let e1 = update_ensemble(&ens, &target, 1).unwrap();
        assert_eq!(e1.n_models(), 4);
        let e2 = update_ensemble(&e1, &data("t", &[0.1, 0.5, 0.9], |x| x), 2).unwrap();
        assert_eq!(e2.n_models(), 4);
        for (a, b) in ens.sources().iter().zip(e2.sources()) {
            assert_eq!(a.hyperparams(), b.hyperparams());
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let space = line();
        let a = construct_ensemble(&space, &historic(), 9).unwrap();
        let b = construct_ensemble(&space, &historic(), 9).unwrap();
        for (x, y) in a.sources().iter().zip(b.sources()) {
            assert_eq!(x.hyperparams(), y.hyperparams());
        }
    }

    #[test]
    fn empty_source_dataset_is_tagged() {
        let mut h = historic();
        h[1] = ObservationDataset::new("empty");
        match construct_ensemble(&line(), &h, 0) {
            Err(Error::SourceFit { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_weights_reproduce_target() {
        let space = line();
        let ens = construct_ensemble(&space, &historic(), 3).unwrap();
        let target = data("t", &[0.1, 0.4, 0.9], |x| x.sin());
        let ens = ens.update(&target, 4).unwrap();
        let gp = ens.target().unwrap().clone();
        let ens = ens.with_weights(vec![0.0, 0.0, 0.0, 1.0], VarianceMode::TargetOnly).unwrap();
        for x in [0.0, 0.33, 0.77] {
            let c = Configuration::reals(&[x]);
            assert_eq!(ens.predict(&c).unwrap(), gp.posterior(&c).unwrap());
        }
    }

    #[test]
    fn mean_is_weighted_sum() {
        let space = line();
        let hp = KernelHyperparams {
            signal_variance: 1.0,
            lengthscales: vec![0.2],
            hamming_lengthscales: vec![],
            noise_variance: 1e-10,
        };
        // Constant-output GPs predict exactly their constant.
        let src = GpSurrogate::with_hyperparams(&space, &data("s", &[0.2, 0.8], |_| 2.0), hp.clone()).unwrap();
        let tgt = GpSurrogate::with_hyperparams(&space, &data("t", &[0.5], |_| 4.0), hp).unwrap();
        let ens = EnsembleModel::from_sources(&space, vec![Arc::new(src)])
            .with_target(Arc::new(tgt))
            .with_weights(vec![0.5, 0.5], VarianceMode::TargetOnly)
            .unwrap();
        let (m, _) = ens.predict(&Configuration::reals(&[0.3])).unwrap();
        assert!((m - 3.0).abs() < 1e-12);
    }

    #[test]
    fn target_only_variance_ignores_source_weights() {
        let space = line();
        let ens = construct_ensemble(&space, &historic(), 3)
            .unwrap()
            .update(&data("t", &[0.2, 0.6], |x| x), 1)
            .unwrap();
        let x = Configuration::reals(&[0.45]);
        let a = ens.clone().with_weights(vec![0.1, 0.2, 0.3, 0.4], VarianceMode::TargetOnly).unwrap();
        let b = ens.clone().with_weights(vec![-3.0, 7.0, 0.0, 0.4], VarianceMode::TargetOnly).unwrap();
        assert_eq!(a.predict(&x).unwrap().1.to_bits(), b.predict(&x).unwrap().1.to_bits());

        // Linear in the weights for fixed x.
        let w1 = vec![0.1, 0.2, 0.3, 0.4];
        let w2 = vec![1.0, -0.5, 0.25, 2.0];
        let sum: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
        let m = |w: Vec<f64>| ens.clone().with_weights(w, VarianceMode::TargetOnly).unwrap().predict(&x).unwrap().0;
        let lhs = m(sum);
        let rhs = m(w1) + m(w2);
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn unset_weights_are_a_state_error() {
        let space = line();
        let ens = construct_ensemble(&space, &historic(), 3)
            .unwrap()
            .update(&data("t", &[0.2], |x| x), 1)
            .unwrap();
        assert!(matches!(ens.predict(&Configuration::reals(&[0.5])), Err(Error::State(_))));
        assert!(ens.clone().with_weights(vec![1.0], VarianceMode::TargetOnly).is_err());
    }
}
