//! The three subcommands over an output directory:
//!
//! ```text
//! <out>/family.csv                     cartpole parameters (cartpole only)
//! <out>/historic/<task>__h<k>.csv      historic standard-BO datasets
//! <out>/records/<method>__<task>__<seed>.json
//! <out>/timings/<method>__<task>__<seed>.json
//! <out>/index.jsonl                    one line per finished cell
//! <out>/analysis/*.csv
//! ```
//!
//! Every random stream derives from the master seed, so results do not
//! depend on the worker count or on scheduling order.

use std::collections::{HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context as _, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tlbo_core::analysis::{self, minima_overlap, DEFAULT_CLUSTER_THRESHOLD, DEFAULT_MINIMA_TOLERANCE};
use tlbo_core::benchmarks::{save_cartpole_family, BenchmarkTask};
use tlbo_core::io::write_atomic;
use tlbo_core::pipeline::{
    cell_key, fit_source_models, historic_run, run_bo_with_models, sources_excluding, MethodSpec, RunRecord,
};
use tlbo_core::surrogate::GpSurrogate;
use tlbo_core::{seed, ObservationDataset};

use crate::config::ExperimentConfig;
use crate::export;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// One line of `index.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub key: String,
    pub record: String,
    pub status: CellStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub executed: usize,
    pub skipped: usize,
    pub failed: Vec<String>,
}

pub struct Experiment {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub workers: usize,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, out: impl Into<PathBuf>, workers: usize) -> Self {
        Experiment {
            config,
            out: out.into(),
            workers: workers.max(1),
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        Ok(rayon::ThreadPoolBuilder::new().num_threads(self.workers).build()?)
    }

    fn master(&self) -> u64 {
        self.config.master_seed
    }

    pub fn historic_path(&self, task: &str, k: usize) -> PathBuf {
        self.out.join("historic").join(format!("{task}__h{k}.csv"))
    }

    pub fn record_path(&self, key: &str) -> PathBuf {
        self.out.join("records").join(format!("{key}.json"))
    }

    pub fn index_path(&self) -> PathBuf {
        self.out.join("index.jsonl")
    }

    pub fn analysis_dir(&self) -> PathBuf {
        self.out.join("analysis")
    }

    fn historic_method(&self) -> MethodSpec {
        let mut m = MethodSpec::standard_bo("historic");
        m.budget = self.config.historic.n_evals;
        m.acquisition = self.config.historic.acquisition.clone();
        m
    }

    /// Run seed of the `(task, seed)` cell; shared by every method.
    pub fn run_seed(&self, task: &str, s: u64) -> u64 {
        seed::derive_indexed(self.master(), &format!("run/{task}"), s)
    }

    pub fn generate_historic(&self) -> Result<Vec<PathBuf>> {
        let tasks = self.config.tasks()?;
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        if let Some(family) = self.config.cartpole_family()? {
            save_cartpole_family(&self.out.join("family.csv"), &family)?;
        }
        let method = self.historic_method();
        method.validate()?;
        let cells: Vec<(usize, usize)> =
            (0..tasks.len()).flat_map(|t| (0..self.config.historic.n_seeds).map(move |k| (t, k))).collect();
        let pool = self.pool()?;
        pool.install(|| {
            cells
                .par_iter()
                .map(|&(t, k)| {
                    let task = &tasks[t];
                    let s = seed::derive_indexed(self.master(), &format!("historic/{}", task.id), k as u64);
                    let data = historic_run(&method, task, s)?;
                    let path = self.historic_path(&task.id, k);
                    let provenance = [
                        ("task", task.id.clone()),
                        ("historic_seed_index", k.to_string()),
                        ("run_seed", s.to_string()),
                        ("master_seed", self.master().to_string()),
                        ("n_evals", method.budget.to_string()),
                        ("generator", "standard_bo random_10".to_string()),
                    ]
                    .map(|(a, b)| (a.to_string(), b));
                    data.save_csv(&task.space, &provenance, &path)?;
                    log::info!("historic {} seed {k}: best {:.6}", task.id, data.min_output().unwrap_or(f64::NAN));
                    Ok(path)
                })
                .collect()
        })
    }

    /// `result[task][k]` for the first `n_seeds` historic seeds.
    pub fn load_historic(&self, tasks: &[BenchmarkTask], n_seeds: usize) -> Result<Vec<Vec<ObservationDataset>>> {
        tasks
            .iter()
            .map(|t| {
                (0..n_seeds)
                    .map(|k| {
                        let path = self.historic_path(&t.id, k);
                        if !path.is_file() {
                            bail!("missing historic dataset {}; run generate-historic first", path.display());
                        }
                        Ok(ObservationDataset::load_csv(&t.space, &t.id, &path)?.0)
                    })
                    .collect()
            })
            .collect()
    }

    /// Keys of cells whose record finished without failure.
    pub fn completed_cells(&self) -> Result<HashSet<String>> {
        let path = self.index_path();
        if !path.exists() {
            return Ok(HashSet::new());
        }
        let text = fs::read_to_string(&path)?;
        let mut done = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: IndexEntry = match serde_json::from_str(line) {
                Ok(e) => e,
                Err(e) => {
                    log::warn!("{}:{}: ignoring unreadable index line: {e}", path.display(), i + 1);
                    continue;
                }
            };
            match entry.status {
                CellStatus::Ok if self.out.join(&entry.record).is_file() => {
                    done.insert(entry.key);
                }
                CellStatus::Ok => log::warn!("index names missing record {}; cell will rerun", entry.record),
                CellStatus::Failed => {
                    done.remove(&entry.key);
                }
            }
        }
        Ok(done)
    }

    /// Executes every (method, task, seed) cell not yet completed.
    pub fn run(&self) -> Result<RunSummary> {
        let tasks = self.config.tasks()?;
        let needs_sources = self.config.methods.iter().any(MethodSpec::uses_sources);
        let pool = self.pool()?;
        let (historic, models) = if needs_sources {
            let historic: Vec<ObservationDataset> =
                self.load_historic(&tasks, 1)?.into_iter().map(|mut v| v.remove(0)).collect();
            let model_seed = seed::derive(self.master(), "source_models");
            let models: Vec<Arc<GpSurrogate>> = pool.install(|| {
                historic
                    .par_iter()
                    .zip(&tasks)
                    .map(|(d, t)| Ok(fit_source_models(&t.space, std::slice::from_ref(d), model_seed)?.remove(0)))
                    .collect::<Result<_>>()
            })?;
            (historic, models)
        } else {
            (Vec::new(), Vec::new())
        };

        let done = self.completed_cells()?;
        let mut cells = Vec::new();
        let mut skipped = 0;
        for method in &self.config.methods {
            for (t, task) in tasks.iter().enumerate() {
                for &s in &self.config.seeds {
                    if done.contains(&cell_key(&method.id, &task.id, s)) {
                        skipped += 1;
                    } else {
                        cells.push((method, t, s));
                    }
                }
            }
        }
        log::info!("{} cells to run, {skipped} already complete", cells.len());
        fs::create_dir_all(&self.out)?;
        let index = Mutex::new(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(self.index_path())
                .with_context(|| format!("opening {}", self.index_path().display()))?,
        );
        let outcomes: Vec<Result<(String, bool)>> = pool.install(|| {
            cells
                .par_iter()
                .map(|&(method, t, s)| {
                    let (h, m) = if method.uses_sources() {
                        sources_excluding(&historic, &models, t)
                    } else {
                        (Vec::new(), Vec::new())
                    };
                    self.run_cell(method, &tasks[t], &h, &m, s, &index)
                })
                .collect()
        });
        let mut summary = RunSummary {
            skipped,
            ..RunSummary::default()
        };
        for o in outcomes {
            let (key, failed) = o?;
            summary.executed += 1;
            if failed {
                summary.failed.push(key);
            }
        }
        summary.failed.sort();
        Ok(summary)
    }

    fn run_cell(
        &self,
        method: &MethodSpec,
        task: &BenchmarkTask,
        historic: &[ObservationDataset],
        models: &[Arc<GpSurrogate>],
        s: u64,
        index: &Mutex<fs::File>,
    ) -> Result<(String, bool)> {
        let key = cell_key(&method.id, &task.id, s);
        let (mut record, timing) = match run_bo_with_models(method, task, historic, models, self.run_seed(&task.id, s)) {
            Ok(r) => r,
            Err(e) => (
                RunRecord {
                    method: method.id.clone(),
                    task: task.id.clone(),
                    seed: s,
                    budget: method.budget,
                    sources: historic.iter().map(|d| d.task_id.clone()).collect(),
                    iterations: Vec::new(),
                    failure: Some(e.to_string()),
                },
                Default::default(),
            ),
        };
        record.seed = s;
        let failed = record.failure.is_some();
        if let Some(f) = &record.failure {
            log::error!("cell {key} failed: {f}");
        } else {
            log::info!("cell {key}: final incumbent {:.6}", record.incumbents().last().copied().unwrap_or(f64::NAN));
        }
        let mut bytes = serde_json::to_vec_pretty(&record)?;
        bytes.push(b'\n');
        write_atomic(&self.record_path(&key), &bytes)?;
        write_atomic(&self.out.join("timings").join(format!("{key}.json")), &serde_json::to_vec(&timing)?)?;
        let entry = IndexEntry {
            key: key.clone(),
            record: format!("records/{key}.json"),
            status: if failed { CellStatus::Failed } else { CellStatus::Ok },
        };
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        {
            let mut f = index.lock().map_err(|_| anyhow::anyhow!("index lock poisoned"))?;
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        Ok((key, failed))
    }

    /// All records under `records/`, sorted by file name.
    pub fn load_records(&self) -> Result<Vec<RunRecord>> {
        let dir = self.out.join("records");
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
        paths.sort();
        paths
            .iter()
            .map(|p| {
                let text = fs::read_to_string(p)?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            })
            .collect()
    }

    /// Writes the analysis tables; returns the paths written.
    pub fn analyze(&self) -> Result<Vec<PathBuf>> {
        let tasks = self.config.tasks()?;
        let mut records = self.load_records()?;
        let before = records.len();
        records.retain(|r| r.failure.is_none());
        if records.len() < before {
            log::warn!("excluding {} failed records from analysis", before - records.len());
        }
        if records.is_empty() {
            bail!("no completed records under {}", self.out.join("records").display());
        }
        let dir = self.analysis_dir();
        let mut written = Vec::new();
        let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
            let p = dir.join(name);
            write_atomic(&p, &bytes)?;
            written.push(p);
            Ok(())
        };

        let known: HashMap<String, (f64, f64)> =
            tasks.iter().filter_map(|t| t.known_range.map(|r| (t.id.clone(), r))).collect();
        let ranges = analysis::task_ranges(&records, &known);
        emit("regret.csv", export::regret_csv(&analysis::normalized_regret(&records, &ranges)?)?)?;
        emit("normalization.csv", export::normalization_csv(&ranges, &known)?)?;

        let methods: HashSet<&str> = records.iter().map(|r| r.method.as_str()).collect();
        if methods.len() < 2 {
            log::warn!("only one method in the records; rank table omitted");
        } else {
            match analysis::ranking_curves(&records) {
                Ok(curves) => emit("rank.csv", export::rank_csv(&curves)?)?,
                Err(e) => log::warn!("rank table omitted: {e}"),
            }
        }

        let n_seeds = self.config.historic.n_seeds;
        let have_historic = tasks
            .iter()
            .all(|t| (0..n_seeds).all(|k| self.historic_path(&t.id, k).is_file()));
        if tasks.len() < 2 || !have_historic {
            log::warn!("overlap analysis needs historic datasets for at least two tasks; skipped");
        } else {
            let historic = self.load_historic(&tasks, n_seeds)?;
            let space = &tasks[0].space;
            let o = minima_overlap(space, &historic, DEFAULT_MINIMA_TOLERANCE, DEFAULT_CLUSTER_THRESHOLD)?;
            emit("overlap.csv", export::overlap_csv(&o)?)?;
            emit("clusters.csv", export::clusters_csv(&o, space)?)?;
            emit("cluster_sizes.csv", export::cluster_sizes_csv(&o)?)?;
        }
        Ok(written)
    }
}
