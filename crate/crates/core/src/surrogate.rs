//! Single-task Gaussian-process regression.
//!
//! Kernel: `s · Matérn-5/2(numeric dims, ARD) · exp(-Σ mismatch_c / h_c)`
//! plus white noise `ζ²` on the training diagonal. Outputs are standardised
//! before fitting so the zero prior mean is meaningful; predictions are
//! returned in the original units. Hyperparameters maximise the log
//! marginal likelihood with a projected L-BFGS run from several starts in
//! log space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::ObservationDataset;
use crate::error::{Error, Result};
use crate::search_space::{Configuration, SearchSpace};
use crate::seed;

const SQRT5: f64 = 2.236_067_977_499_79;

pub const SIGNAL_BOUNDS: (f64, f64) = (1e-2, 1e2);
pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const NOISE_BOUNDS: (f64, f64) = (1e-8, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHyperparams {
    pub signal_variance: f64,
    /// One per numeric variable, in encoded units.
    pub lengthscales: Vec<f64>,
    /// One per categorical variable.
    pub hamming_lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelHyperparams {
    pub fn default_for(space: &SearchSpace) -> Self {
        KernelHyperparams {
            signal_variance: 1.0,
            lengthscales: vec![0.5; space.n_numeric()],
            hamming_lengthscales: vec![1.0; space.n_categorical()],
            noise_variance: 1e-3,
        }
    }

    pub fn n_params(&self) -> usize {
        2 + self.lengthscales.len() + self.hamming_lengthscales.len()
    }

    /// `[ln s, ln ℓ.., ln h.., ln ζ²]`
    pub fn to_log(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.push(self.signal_variance.ln());
        v.extend(self.lengthscales.iter().map(|l| l.ln()));
        v.extend(self.hamming_lengthscales.iter().map(|l| l.ln()));
        v.push(self.noise_variance.ln());
        v
    }

    pub fn from_log(log: &[f64], n_numeric: usize, n_categorical: usize) -> Self {
        assert_eq!(log.len(), 2 + n_numeric + n_categorical);
        KernelHyperparams {
            signal_variance: log[0].exp(),
            lengthscales: log[1..1 + n_numeric].iter().map(|v| v.exp()).collect(),
            hamming_lengthscales: log[1 + n_numeric..1 + n_numeric + n_categorical]
                .iter()
                .map(|v| v.exp())
                .collect(),
            noise_variance: log[log.len() - 1].exp(),
        }
    }

    fn log_bounds(n_numeric: usize, n_categorical: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![SIGNAL_BOUNDS.0.ln()];
        let mut hi = vec![SIGNAL_BOUNDS.1.ln()];
        for _ in 0..n_numeric + n_categorical {
            lo.push(LENGTHSCALE_BOUNDS.0.ln());
            hi.push(LENGTHSCALE_BOUNDS.1.ln());
        }
        lo.push(NOISE_BOUNDS.0.ln());
        hi.push(NOISE_BOUNDS.1.ln());
        (lo, hi)
    }
}

/// Kernel value between two encoded points, without the white-noise term.
pub fn kernel_eval(hp: &KernelHyperparams, categorical: &[bool], u: &[f64], v: &[f64]) -> f64 {
    let mut r2 = 0.0;
    let mut mismatch = 0.0;
    let (mut ni, mut ci) = (0, 0);
    for (k, &cat) in categorical.iter().enumerate() {
        if cat {
            if u[k] != v[k] {
                mismatch += 1.0 / hp.hamming_lengthscales[ci];
            }
            ci += 1;
        } else {
            let d = (u[k] - v[k]) / hp.lengthscales[ni];
            r2 += d * d;
            ni += 1;
        }
    }
    let r = r2.sqrt();
    hp.signal_variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * (-SQRT5 * r).exp() * (-mismatch).exp()
}

/// Kernel evaluator with the reciprocal lengthscales precomputed.
#[derive(Debug, Clone)]
struct Kernel {
    signal: f64,
    numeric: Vec<(usize, f64)>,
    categorical: Vec<(usize, f64)>,
}

impl Kernel {
    fn new(hp: &KernelHyperparams, mask: &[bool]) -> Self {
        let (mut numeric, mut categorical) = (Vec::new(), Vec::new());
        let (mut ni, mut ci) = (0, 0);
        for (k, &cat) in mask.iter().enumerate() {
            if cat {
                categorical.push((k, 1.0 / hp.hamming_lengthscales[ci]));
                ci += 1;
            } else {
                numeric.push((k, 1.0 / hp.lengthscales[ni]));
                ni += 1;
            }
        }
        Kernel {
            signal: hp.signal_variance,
            numeric,
            categorical,
        }
    }

    #[inline]
    fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for &(k, inv) in &self.numeric {
            let d = (u[k] - v[k]) * inv;
            r2 += d * d;
        }
        let mut mismatch = 0.0;
        for &(k, inv) in &self.categorical {
            if u[k] != v[k] {
                mismatch += inv;
            }
        }
        let r = r2.sqrt();
        self.signal * (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * (-(SQRT5 * r + mismatch)).exp()
    }
}

#[derive(Debug, Clone, Copy)]
struct Standardizer {
    mean: f64,
    scale: f64,
}

impl Standardizer {
    fn fit(y: &[f64]) -> Self {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        Standardizer {
            mean,
            scale: if sd > 1e-12 * (1.0 + mean.abs()) { sd } else { 1.0 },
        }
    }
}

/// Log marginal likelihood of standardised data as a function of the
/// kernel hyperparameters, with analytic gradients in log space.
pub struct MarginalLikelihood {
    n_numeric: usize,
    n_categorical: usize,
    y: DVector<f64>,
    /// Per numeric dim, squared coordinate differences (n×n).
    sq_diff: Vec<DMatrix<f64>>,
    /// Per categorical dim, mismatch indicators (n×n).
    mismatch: Vec<DMatrix<f64>>,
}

impl MarginalLikelihood {
    pub fn new(space: &SearchSpace, data: &ObservationDataset) -> Result<Self> {
        let x = data.encoded(space)?;
        let std = Standardizer::fit(&data.outputs);
        let y = DVector::from_iterator(
            data.len(),
            data.outputs.iter().map(|v| (v - std.mean) / std.scale),
        );
        Ok(Self::from_encoded(space.categorical_mask(), &x, y))
    }

    fn from_encoded(mask: &[bool], x: &[Vec<f64>], y: DVector<f64>) -> Self {
        let n = x.len();
        let mut sq_diff = Vec::new();
        let mut mismatch = Vec::new();
        for (k, &cat) in mask.iter().enumerate() {
            let m = DMatrix::from_fn(n, n, |a, b| {
                if cat {
                    if x[a][k] != x[b][k] {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let d = x[a][k] - x[b][k];
                    d * d
                }
            });
            if cat {
                mismatch.push(m);
            } else {
                sq_diff.push(m);
            }
        }
        MarginalLikelihood {
            n_numeric: sq_diff.len(),
            n_categorical: mismatch.len(),
            y,
            sq_diff,
            mismatch,
        }
    }

    pub fn n_params(&self) -> usize {
        2 + self.n_numeric + self.n_categorical
    }

    pub fn value(&self, hp: &KernelHyperparams) -> Option<f64> {
        self.evaluate(&hp.to_log(), false).map(|(v, _)| v)
    }

    /// Log marginal likelihood and its gradient w.r.t. the log parameters
    /// (`None` when the covariance is not positive definite).
    pub fn value_and_gradient(&self, hp: &KernelHyperparams) -> Option<(f64, Vec<f64>)> {
        self.evaluate(&hp.to_log(), true)
    }

    fn evaluate(&self, log: &[f64], with_grad: bool) -> Option<(f64, Vec<f64>)> {
        let hp = KernelHyperparams::from_log(log, self.n_numeric, self.n_categorical);
        let n = self.y.len();
        let s = hp.signal_variance;
        let inv_l2: Vec<f64> = hp.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        let inv_h: Vec<f64> = hp.hamming_lengthscales.iter().map(|h| 1.0 / h).collect();

        // r², the Matérn radial factor and the Hamming factor per pair.
        let mut base = DMatrix::zeros(n, n);
        let mut dmat = DMatrix::zeros(n, n); // (5/3)(1+√5r)e^{-√5r}·hamming
        for b in 0..n {
            for a in b..n {
                let mut r2 = 0.0;
                for (d, m) in self.sq_diff.iter().enumerate() {
                    r2 += m[(a, b)] * inv_l2[d];
                }
                let mut mis = 0.0;
                for (c, m) in self.mismatch.iter().enumerate() {
                    mis += m[(a, b)] * inv_h[c];
                }
                let r = r2.sqrt();
                let e = (-(SQRT5 * r + mis)).exp();
                let k = s * (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * e;
                let dk = s * 5.0 / 3.0 * (1.0 + SQRT5 * r) * e;
                base[(a, b)] = k;
                base[(b, a)] = k;
                dmat[(a, b)] = dk;
                dmat[(b, a)] = dk;
            }
        }
        let mut kmat = base.clone();
        for i in 0..n {
            kmat[(i, i)] += hp.noise_variance;
        }
        let chol = Cholesky::new(kmat)?;
        let alpha = chol.solve(&self.y);
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        let value = -0.5 * self.y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        if !value.is_finite() {
            return None;
        }
        if !with_grad {
            return Some((value, Vec::new()));
        }
        // W = ααᵀ − K⁻¹ ; ∂/∂θ = ½ Σ W ∘ ∂K/∂θ
        let kinv = chol.inverse();
        let w = &alpha * alpha.transpose() - kinv;
        let mut grad = Vec::with_capacity(self.n_params());
        grad.push(0.5 * w.component_mul(&base).sum());
        for (d, m) in self.sq_diff.iter().enumerate() {
            let mut acc = 0.0;
            for b in 0..n {
                for a in 0..n {
                    acc += w[(a, b)] * dmat[(a, b)] * m[(a, b)];
                }
            }
            grad.push(0.5 * acc * inv_l2[d]);
        }
        for (c, m) in self.mismatch.iter().enumerate() {
            let mut acc = 0.0;
            for b in 0..n {
                for a in 0..n {
                    acc += w[(a, b)] * base[(a, b)] * m[(a, b)];
                }
            }
            grad.push(0.5 * acc * inv_h[c]);
        }
        grad.push(0.5 * w.trace() * hp.noise_variance);
        Some((value, grad))
    }
}

/// Fitting controls.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Random restarts in addition to the default starting point.
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 5,
            max_iterations: 100,
        }
    }
}

/// A fitted Gaussian process over one task's observations.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    space: SearchSpace,
    train_inputs: Vec<Vec<f64>>,
    train_outputs: DVector<f64>,
    output_mean: f64,
    output_scale: f64,
    hyperparams: KernelHyperparams,
    kernel: Kernel,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
    log_marginal_likelihood: f64,
}

impl GpSurrogate {
    /// Fits hyperparameters by maximising the log marginal likelihood.
    pub fn fit(space: &SearchSpace, data: &ObservationDataset, seed: u64) -> Result<Self> {
        Self::fit_with(space, data, seed, &FitOptions::default())
    }

    pub fn fit_with(space: &SearchSpace, data: &ObservationDataset, seed: u64, opts: &FitOptions) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Config("cannot fit a GP to an empty dataset".into()));
        }
        let objective = MarginalLikelihood::new(space, data)?;
        let (nn, nc) = (space.n_numeric(), space.n_categorical());
        let (lo, hi) = KernelHyperparams::log_bounds(nn, nc);

        let mut starts = vec![KernelHyperparams::default_for(space).to_log()];
        let mut rng = seed::rng(seed);
        let log_uniform = |rng: &mut seed::Rng, a: f64, b: f64| a.ln() + rng.random::<f64>() * (b.ln() - a.ln());
        for _ in 0..opts.restarts {
            let mut v = vec![log_uniform(&mut rng, 0.1, 10.0)];
            for _ in 0..nn {
                v.push(log_uniform(&mut rng, 0.01, 10.0));
            }
            for _ in 0..nc {
                v.push(log_uniform(&mut rng, 0.1, 10.0));
            }
            v.push(log_uniform(&mut rng, 1e-6, 0.1));
            starts.push(v);
        }

        let f = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
            objective
                .evaluate(x, true)
                .map(|(v, g)| (-v, g.into_iter().map(|gi| -gi).collect()))
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        for start in starts {
            if let Some((val, x)) = minimize_box(&f, start, &lo, &hi, opts.max_iterations) {
                if best.as_ref().is_none_or(|(b, _)| val < *b) {
                    best = Some((val, x));
                }
            }
        }
        let hp = match best {
            Some((_, x)) => KernelHyperparams::from_log(&x, nn, nc),
            None => KernelHyperparams::default_for(space),
        };
        Self::with_hyperparams(space, data, hp)
    }

    /// Conditions a GP with fixed hyperparameters on `data`.
    pub fn with_hyperparams(space: &SearchSpace, data: &ObservationDataset, hp: KernelHyperparams) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Config("cannot fit a GP to an empty dataset".into()));
        }
        if hp.lengthscales.len() != space.n_numeric() || hp.hamming_lengthscales.len() != space.n_categorical() {
            return Err(Error::Config("hyperparameter layout does not match the space".into()));
        }
        let x = data.encoded(space)?;
        let std = Standardizer::fit(&data.outputs);
        let y = DVector::from_iterator(
            data.len(),
            data.outputs.iter().map(|v| (v - std.mean) / std.scale),
        );
        let kernel = Kernel::new(&hp, space.categorical_mask());
        let n = x.len();
        let base = DMatrix::from_fn(n, n, |a, b| kernel.eval(&x[a], &x[b]));
        let base = (&base + base.transpose()) * 0.5;

        let mut jitter = 0.0;
        let chol = loop {
            let mut k = base.clone();
            for i in 0..n {
                k[(i, i)] += hp.noise_variance + jitter;
            }
            if let Some(c) = Cholesky::new(k) {
                break c;
            }
            jitter = if jitter == 0.0 {
                1e-8 * hp.signal_variance
            } else {
                jitter * 10.0
            };
            if jitter > 1e-2 * hp.signal_variance * (1.0 + 1e-9) {
                return Err(Error::Singular { jitter: jitter / 10.0 });
            }
        };
        let alpha = chol.solve(&y);
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        let lml = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(GpSurrogate {
            space: space.clone(),
            train_inputs: x,
            train_outputs: y,
            output_mean: std.mean,
            output_scale: std.scale,
            hyperparams: hp,
            kernel,
            chol,
            alpha,
            jitter,
            log_marginal_likelihood: lml,
        })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn hyperparams(&self) -> &KernelHyperparams {
        &self.hyperparams
    }

    pub fn n_train(&self) -> usize {
        self.train_inputs.len()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn output_mean(&self) -> f64 {
        self.output_mean
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    /// Prior variance of the latent function in original output units.
    pub fn prior_variance(&self) -> f64 {
        self.hyperparams.signal_variance * self.output_scale * self.output_scale
    }

    /// Observation noise variance in original output units.
    pub fn noise_variance(&self) -> f64 {
        (self.hyperparams.noise_variance + self.jitter) * self.output_scale * self.output_scale
    }

    /// Posterior mean and latent variance at `x`, in original units.
    pub fn posterior(&self, x: &Configuration) -> Result<(f64, f64)> {
        Ok(self.predict_encoded(&self.space.encode(x)?))
    }

    pub fn predict_encoded(&self, u: &[f64]) -> (f64, f64) {
        let kstar = DVector::from_iterator(
            self.train_inputs.len(),
            self.train_inputs.iter().map(|xi| self.kernel.eval(xi, u)),
        );
        let mean = kstar.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("cholesky factor has a positive diagonal");
        let var = (self.hyperparams.signal_variance - v.norm_squared()).max(0.0);
        (
            self.output_mean + self.output_scale * mean,
            var * self.output_scale * self.output_scale,
        )
    }

    /// Posterior mean only (skips the triangular solve).
    pub fn mean_encoded(&self, u: &[f64]) -> f64 {
        let mut m = 0.0;
        for (xi, a) in self.train_inputs.iter().zip(self.alpha.iter()) {
            m += self.kernel.eval(xi, u) * a;
        }
        self.output_mean + self.output_scale * m
    }

    /// Leave-one-out posterior means at the training inputs (fixed
    /// hyperparameters), in original units.
    pub fn loo_means(&self) -> Vec<f64> {
        let n = self.train_inputs.len();
        if n == 1 {
            return vec![self.output_mean];
        }
        let kinv = self.chol.inverse();
        (0..n)
            .map(|i| {
                let z = self.train_outputs[i] - self.alpha[i] / kinv[(i, i)];
                self.output_mean + self.output_scale * z
            })
            .collect()
    }
}

/// Box-constrained L-BFGS with projected backtracking line search.
/// Returns the best `(f, x)` found, or `None` when `f` fails at the start.
fn minimize_box<F>(f: &F, x0: Vec<f64>, lo: &[f64], hi: &[f64], max_iter: usize) -> Option<(f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    const MEMORY: usize = 8;
    let n = x0.len();
    let project = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut x = x0;
    project(&mut x);
    let (mut fx, mut g) = f(&x)?;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();

    for _ in 0..max_iter {
        // Variables pinned at a bound with the gradient pushing outward.
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let pg_norm = (0..n).filter(|&i| free[i]).map(|i| g[i].abs()).fold(0.0, f64::max);
        if pg_norm < 1e-6 {
            break;
        }

        let mut d: Vec<f64> = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        if !s_hist.is_empty() {
            let k = s_hist.len();
            let mut rho = vec![0.0; k];
            let mut a = vec![0.0; k];
            for j in (0..k).rev() {
                rho[j] = 1.0 / dot(&y_hist[j], &s_hist[j]);
                a[j] = rho[j] * dot(&s_hist[j], &d);
                for i in 0..n {
                    d[i] -= a[j] * y_hist[j][i];
                }
            }
            let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
            for v in d.iter_mut() {
                *v *= gamma;
            }
            for j in 0..k {
                let b = rho[j] * dot(&y_hist[j], &d);
                for i in 0..n {
                    d[i] += s_hist[j][i] * (a[j] - b);
                }
            }
            for i in 0..n {
                if !free[i] {
                    d[i] = 0.0;
                }
            }
        }
        if dot(&d, &g) >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }

        let mut step = if s_hist.is_empty() {
            (1.0 / d.iter().map(|v| v.abs()).fold(0.0, f64::max)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = (0..n).map(|i| x[i] + step * d[i]).collect();
            project(&mut xn);
            if let Some((fn_, gn)) = f(&xn) {
                let decrease: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
                if fn_ <= fx + 1e-4 * decrease {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if s_hist.is_empty() {
                break;
            }
            s_hist.clear();
            y_hist.clear();
            continue;
        };
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let yv: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        if dot(&s, &yv) > 1e-12 {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(yv);
        }
        let converged = (fx - fn_).abs() <= 1e-10 * fx.abs().max(1.0);
        x = xn;
        fx = fn_;
        g = gn;
        if converged {
            break;
        }
    }
    Some((fx, x))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::{Value, Variable};
    use proptest::prelude::*;

    fn line() -> SearchSpace {
        SearchSpace::new(vec![Variable::continuous("x", 0.0, 1.0)]).unwrap()
    }

    fn dataset(xs: &[f64], ys: &[f64]) -> ObservationDataset {
        ObservationDataset::from_pairs("t", xs.iter().map(|&x| Configuration::reals(&[x])).collect(), ys.to_vec())
            .unwrap()
    }

    #[test]
    fn kernel_limits() {
        let mask = [false, false];
        let hp = KernelHyperparams {
            signal_variance: 2.5,
            lengthscales: vec![0.3, 0.7],
            hamming_lengthscales: vec![],
            noise_variance: 0.1,
        };
        assert_eq!(kernel_eval(&hp, &mask, &[0.2, 0.4], &[0.2, 0.4]), 2.5);
        assert!(kernel_eval(&hp, &mask, &[0.0, 0.0], &[1e3, 1e3]) < 1e-300);

        let cat_mask = [true, true, true];
        let mut hp = KernelHyperparams {
            signal_variance: 1.7,
            lengthscales: vec![],
            hamming_lengthscales: vec![1e12; 3],
            noise_variance: 0.0,
        };
        let k = kernel_eval(&hp, &cat_mask, &[0.0, 1.0, 2.0], &[1.0, 0.0, 0.0]);
        assert!((k - 1.7).abs() < 1e-9);
        hp.hamming_lengthscales = vec![1.0; 3];
        let k = kernel_eval(&hp, &cat_mask, &[0.0, 1.0, 2.0], &[1.0, 1.0, 0.0]);
        assert!((k - 1.7 * (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn single_point_interpolates() {
        let space = line();
        let gp = GpSurrogate::fit(&space, &dataset(&[0.3], &[4.2]), 1).unwrap();
        let (m, v) = gp.posterior(&Configuration::reals(&[0.3])).unwrap();
        assert!((m - 4.2).abs() < 1e-12);
        assert!(v <= gp.noise_variance() + 1e-15);
    }

    #[test]
    fn constant_outputs_predict_constant() {
        let space = line();
        let gp = GpSurrogate::fit(&space, &dataset(&[0.1, 0.5, 0.9], &[3.0, 3.0, 3.0]), 2).unwrap();
        for x in [0.0, 0.33, 1.0] {
            let (m, _) = gp.posterior(&Configuration::reals(&[x])).unwrap();
            assert!((m - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn noise_free_interpolation() {
        let space = line();
        let data = dataset(&[0.1, 0.4, 0.8], &[1.0, -2.0, 0.5]);
        let hp = KernelHyperparams {
            signal_variance: 1.0,
            lengthscales: vec![0.3],
            hamming_lengthscales: vec![],
            noise_variance: 1e-12,
        };
        let gp = GpSurrogate::with_hyperparams(&space, &data, hp).unwrap();
        for (x, y) in data.inputs.iter().zip(&data.outputs) {
            let (m, _) = gp.posterior(x).unwrap();
            assert!((m - y).abs() <= 1e-6 * y.abs());
        }
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let space = SearchSpace::new(vec![Variable::continuous("x", 0.0, 1000.0)]).unwrap();
        let data = dataset(&[0.0, 1.0, 2.0], &[1.0, 2.0, 0.0]);
        let hp = KernelHyperparams {
            signal_variance: 1.0,
            lengthscales: vec![0.001],
            hamming_lengthscales: vec![],
            noise_variance: 1e-4,
        };
        let gp = GpSurrogate::with_hyperparams(&space, &data, hp).unwrap();
        let (m, v) = gp.posterior(&Configuration::reals(&[900.0])).unwrap();
        assert!((m - gp.output_mean()).abs() < 1e-9);
        assert!((v - gp.prior_variance()).abs() < 1e-9);
    }

    #[test]
    fn fitted_likelihood_beats_random_draws() {
        let space = line();
        let xs = [0.05, 0.3, 0.5, 0.72, 0.95];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| (6.0 * x).sin()).collect();
        let data = dataset(&xs, &ys);
        let gp = GpSurrogate::fit(&space, &data, 11).unwrap();
        let lml = MarginalLikelihood::new(&space, &data).unwrap();
        let fitted = lml.value(gp.hyperparams()).unwrap();
        assert!((fitted - gp.log_marginal_likelihood()).abs() < 1e-9);
        let mut rng = seed::rng(99);
        for _ in 0..10 {
            let hp = KernelHyperparams {
                signal_variance: (rng.random::<f64>() * 4.0 - 2.0).exp(),
                lengthscales: vec![(rng.random::<f64>() * 6.0 - 4.0).exp()],
                hamming_lengthscales: vec![],
                noise_variance: (rng.random::<f64>() * 10.0 - 12.0).exp(),
            };
            if let Some(v) = lml.value(&hp) {
                assert!(fitted >= v - 1e-9, "fitted {fitted} < random {v}");
            }
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let space = line();
        let data = dataset(&[0.1, 0.2, 0.6, 0.9], &[0.3, 0.1, -0.4, 0.8]);
        let a = GpSurrogate::fit(&space, &data, 5).unwrap();
        let b = GpSurrogate::fit(&space, &data, 5).unwrap();
        assert_eq!(a.hyperparams(), b.hyperparams());
        let x = Configuration::reals(&[0.45]);
        assert_eq!(a.posterior(&x).unwrap(), b.posterior(&x).unwrap());
        assert_eq!(a.posterior(&x).unwrap(), a.posterior(&x).unwrap());
    }

    #[test]
    fn duplicate_inputs_survive_via_jitter() {
        let space = line();
        let data = dataset(&[0.5, 0.5, 0.5], &[1.0, 1.0 + 1e-9, 1.0]);
        let hp = KernelHyperparams {
            signal_variance: 1.0,
            lengthscales: vec![0.2],
            hamming_lengthscales: vec![],
            noise_variance: 0.0,
        };
        let gp = GpSurrogate::with_hyperparams(&space, &data, hp).unwrap();
        assert!(gp.jitter() > 0.0 && gp.jitter() <= 1e-2);
    }

    #[test]
    fn loo_means_match_refits() {
        let space = line();
        let data = dataset(&[0.1, 0.35, 0.6, 0.85], &[0.2, 1.0, -0.5, 0.3]);
        let hp = KernelHyperparams {
            signal_variance: 1.3,
            lengthscales: vec![0.25],
            hamming_lengthscales: vec![],
            noise_variance: 1e-3,
        };
        let gp = GpSurrogate::with_hyperparams(&space, &data, hp.clone()).unwrap();
        let loo = gp.loo_means();
        // Refit without point i, same standardisation constants.
        let x = data.encoded(&space).unwrap();
        let ys: Vec<f64> = data
            .outputs
            .iter()
            .map(|v| (v - gp.output_mean()) / gp.output_scale())
            .collect();
        for i in 0..4 {
            let keep: Vec<usize> = (0..4).filter(|&j| j != i).collect();
            let k = DMatrix::from_fn(3, 3, |a, b| {
                kernel_eval(&hp, &[false], &x[keep[a]], &x[keep[b]]) + if a == b { hp.noise_variance } else { 0.0 }
            });
            let ks = DVector::from_fn(3, |a, _| kernel_eval(&hp, &[false], &x[keep[a]], &x[i]));
            let yk = DVector::from_fn(3, |a, _| ys[keep[a]]);
            let m = ks.dot(&(k.try_inverse().unwrap() * &yk));
            let expect = gp.output_mean() + gp.output_scale() * m;
            assert!((loo[i] - expect).abs() < 1e-9, "{} vs {}", loo[i], expect);
        }
    }

    fn mixed() -> SearchSpace {
        SearchSpace::new(vec![
            Variable::continuous("a", 0.0, 1.0),
            Variable::categorical("c", ["p", "q", "r"]),
            Variable::integer("n", 0, 10),
        ])
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gradient_matches_finite_differences(seed in any::<u64>()) {
            let space = mixed();
            let mut rng = seed::rng(seed);
            let data = ObservationDataset::from_pairs(
                "t",
                (0..6).map(|_| Configuration(vec![
                    Value::Real(rng.random()),
                    Value::Category(["p", "q", "r"][rng.random_range(0..3)].into()),
                    Value::Integer(rng.random_range(0..=10)),
                ])).collect(),
                (0..6).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect(),
            ).unwrap();
            let lml = MarginalLikelihood::new(&space, &data).unwrap();
            let log: Vec<f64> = vec![
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() * 2.0 - 1.5,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.5,
                -2.0 - rng.random::<f64>() * 2.0,
            ];
            let (_, g) = lml.evaluate(&log, true).unwrap();
            for j in 0..log.len() {
                let h = 1e-5;
                let mut up = log.clone();
                up[j] += h;
                let mut dn = log.clone();
                dn[j] -= h;
                let fd = (lml.evaluate(&up, false).unwrap().0 - lml.evaluate(&dn, false).unwrap().0) / (2.0 * h);
                let tol = 1e-4 * fd.abs().max(g[j].abs()).max(1e-3);
                prop_assert!((fd - g[j]).abs() <= tol, "param {}: fd {} analytic {}", j, fd, g[j]);
            }
        }

        #[test]
        fn posterior_variance_bounded(seed in any::<u64>(), q in 0.0..1.0f64) {
            let space = line();
            let mut rng = seed::rng(seed);
            let xs: Vec<f64> = (0..5).map(|_| rng.random()).collect();
            let ys: Vec<f64> = xs.iter().map(|x| (5.0 * x).cos()).collect();
            let gp = GpSurrogate::fit_with(&space, &dataset(&xs, &ys), seed, &FitOptions { restarts: 1, max_iterations: 30 }).unwrap();
            let (_, v) = gp.posterior(&Configuration::reals(&[q])).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(v <= gp.prior_variance() + gp.noise_variance() + 1e-10);
        }
    }
}
