//! Transfer-learning Bayesian optimisation with ensembles of
//! Gaussian-process surrogates.
//!
//! One GP is trained per historic (source) task, a fresh GP is trained on
//! the target task every iteration, and the ensemble prediction is a
//! weighted combination of their posterior means. The crate provides the
//! weighting strategies, warm-start initialisation, the guards against
//! negative transfer, the benchmark families used to exercise them, and
//! the metrics used to compare runs.

pub mod acquisition;
pub mod analysis;
pub mod benchmarks;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod initialisation;
pub mod io;
pub mod pipeline;
pub mod search_space;
pub mod seed;
pub mod surrogate;
pub mod transfer_guard;
pub mod weighting;

pub use dataset::ObservationDataset;
pub use error::{Error, Result};
pub use search_space::{Configuration, Domain, SearchSpace, Value, Variable};
pub use surrogate::{GpSurrogate, KernelHyperparams};
