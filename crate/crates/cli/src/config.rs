//! Experiment configuration: a versioned JSON document naming the benchmark
//! family, the methods, the seeds and the historic-data settings.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context as _, Result};
use serde::{Deserialize, Serialize};
use tlbo_core::acquisition::AcquisitionConfig;
use tlbo_core::benchmarks::{
    load_grid_tasks, sample_cartpole_family, synthetic_family, BenchmarkTask, CartpoleParams, CartpoleSim, SyntheticKind,
};
use tlbo_core::pipeline::{MethodSpec, DEFAULT_HISTORIC_EVALS};
use tlbo_core::{seed, SearchSpace};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BenchmarkConfig {
    Cartpole {
        n_tasks: usize,
        #[serde(default)]
        sim: CartpoleSim,
    },
    Synthetic {
        family: SyntheticKind,
        n_tasks: usize,
        shift_range: f64,
    },
    Grid {
        space: SearchSpace,
        files: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoricConfig {
    #[serde(default = "default_historic_evals")]
    pub n_evals: usize,
    /// Standard-BO runs per task; the first one feeds the source models.
    #[serde(default = "default_historic_seeds")]
    pub n_seeds: usize,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
}

fn default_historic_evals() -> usize {
    DEFAULT_HISTORIC_EVALS
}

fn default_historic_seeds() -> usize {
    1
}

impl Default for HistoricConfig {
    fn default() -> Self {
        HistoricConfig {
            n_evals: DEFAULT_HISTORIC_EVALS,
            n_seeds: 1,
            acquisition: AcquisitionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub master_seed: u64,
    pub benchmark: BenchmarkConfig,
    /// Standard deviation of Gaussian observation noise on every task.
    #[serde(default)]
    pub noise_std: f64,
    pub methods: Vec<MethodSpec>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub historic: HistoricConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn is_safe_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.') && !id.contains("__")
}

impl ExperimentConfig {
    /// Parses and validates a config file. Relative grid paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let BenchmarkConfig::Grid { files, .. } = &mut cfg.benchmark {
            for f in files.iter_mut() {
                if f.is_relative() {
                    *f = base.join(&*f);
                }
            }
        }
        if let Some(out) = &mut cfg.output_dir {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            self.schema_version
        );
        ensure!(!self.methods.is_empty(), "config lists no methods");
        ensure!(!self.seeds.is_empty(), "config lists no seeds");
        let mut ids = HashSet::new();
        for m in &self.methods {
            ensure!(is_safe_id(&m.id), "method id `{}` must be [A-Za-z0-9._-] without `__`", m.id);
            ensure!(ids.insert(m.id.as_str()), "method id `{}` appears twice", m.id);
            m.validate()?;
        }
        let mut seeds = HashSet::new();
        for s in &self.seeds {
            ensure!(seeds.insert(s), "seed {s} appears twice");
        }
        ensure!(
            self.noise_std.is_finite() && self.noise_std >= 0.0,
            "noise_std must be finite and >= 0"
        );
        ensure!(self.historic.n_seeds >= 1, "historic.n_seeds must be >= 1");
        self.historic.acquisition.validate()?;
        match &self.benchmark {
            BenchmarkConfig::Cartpole { n_tasks, .. } | BenchmarkConfig::Synthetic { n_tasks, .. } => {
                ensure!(*n_tasks >= 1, "benchmark needs at least one task");
            }
            BenchmarkConfig::Grid { files, .. } => {
                ensure!(!files.is_empty(), "grid benchmark lists no files");
                for f in files {
                    if !f.is_file() {
                        bail!("grid file {} does not exist", f.display());
                    }
                }
            }
        }
        if self.methods.iter().any(MethodSpec::uses_sources) {
            ensure!(
                self.n_tasks() >= 2,
                "transfer methods need at least two tasks for leave-one-task-out"
            );
        }
        Ok(())
    }

    pub fn n_tasks(&self) -> usize {
        match &self.benchmark {
            BenchmarkConfig::Cartpole { n_tasks, .. } | BenchmarkConfig::Synthetic { n_tasks, .. } => *n_tasks,
            BenchmarkConfig::Grid { files, .. } => files.len(),
        }
    }

    /// Cartpole parameters of the family, when the benchmark is cartpole.
    pub fn cartpole_family(&self) -> Result<Option<Vec<CartpoleParams>>> {
        match &self.benchmark {
            BenchmarkConfig::Cartpole { n_tasks, .. } => Ok(Some(sample_cartpole_family(
                *n_tasks,
                seed::derive(self.master_seed, "cartpole_family"),
            )?)),
            _ => Ok(None),
        }
    }

    /// Builds the task family; deterministic in the master seed.
    pub fn tasks(&self) -> Result<Vec<BenchmarkTask>> {
        let mut tasks = match &self.benchmark {
            BenchmarkConfig::Cartpole { sim, .. } => self
                .cartpole_family()?
                .unwrap_or_default()
                .into_iter()
                .enumerate()
                .map(|(i, p)| BenchmarkTask::cartpole(format!("cartpole_{i}"), p, *sim))
                .collect(),
            BenchmarkConfig::Synthetic {
                family,
                n_tasks,
                shift_range,
            } => synthetic_family(*family, *n_tasks, *shift_range, seed::derive(self.master_seed, "synthetic_family"))?,
            BenchmarkConfig::Grid { space, files } => load_grid_tasks(space, files)?,
        };
        let mut ids = HashSet::new();
        for t in tasks.iter_mut() {
            ensure!(is_safe_id(&t.id), "task id `{}` must be [A-Za-z0-9._-] without `__`", t.id);
            ensure!(ids.insert(t.id.clone()), "task id `{}` appears twice", t.id);
            t.noise_std = self.noise_std;
        }
        Ok(tasks)
    }

    pub fn output_dir(&self, cli_override: Option<&Path>) -> Result<PathBuf> {
        cli_override
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .context("no output directory: pass --out or set output_dir")
    }
}
