//! Metrics over finished runs and historic datasets.
//!
//! * Normalised simple regret curves and mean-rank curves per method.
//! * Minima overlap: the best points of every historic run are clustered
//!   under the Gower distance, and for each task we estimate how likely it
//!   is that at least one other task shares a minimum cluster.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::ObservationDataset;
use crate::error::{Error, Result};
use crate::pipeline::RunRecord;
use crate::search_space::{Configuration, SearchSpace};

pub const DEFAULT_MINIMA_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub method: String,
    pub values: Vec<f64>,
    /// Number of (task, seed) records averaged.
    pub count: usize,
}

/// `(incumbent − min) / (max − min)`, clamped to `[0, 1]`.
pub fn normalize(incumbent: f64, range: (f64, f64)) -> f64 {
    ((incumbent - range.0) / (range.1 - range.0)).clamp(0.0, 1.0)
}

/// Output range per task: `known` where given, otherwise the min/max of
/// every value recorded for the task across `records`.
pub fn task_ranges(records: &[RunRecord], known: &HashMap<String, (f64, f64)>) -> HashMap<String, (f64, f64)> {
    let mut out: HashMap<String, (f64, f64)> = HashMap::new();
    for r in records {
        if known.contains_key(&r.task) {
            continue;
        }
        let e = out.entry(r.task.clone()).or_insert((f64::INFINITY, f64::NEG_INFINITY));
        for it in &r.iterations {
            e.0 = e.0.min(it.value);
            e.1 = e.1.max(it.value);
        }
    }
    for (k, v) in known {
        out.insert(k.clone(), *v);
    }
    out
}

/// Mean normalised regret per method and evaluation count. Curves run to
/// the longest budget; shorter records hold their last incumbent.
pub fn normalized_regret(records: &[RunRecord], ranges: &HashMap<String, (f64, f64)>) -> Result<Vec<RegretCurve>> {
    let mut by_method: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(&r.method).or_default().push(r);
    }
    by_method
        .into_iter()
        .map(|(method, recs)| {
            let len = recs.iter().map(|r| r.iterations.len()).max().unwrap_or(0);
            let mut sum = vec![0.0; len];
            for r in &recs {
                let range = *ranges
                    .get(&r.task)
                    .ok_or_else(|| Error::Config(format!("no output range for task `{}`", r.task)))?;
                if !(range.1 > range.0) {
                    return Err(Error::Config(format!(
                        "task `{}` has a degenerate range [{}, {}]",
                        r.task, range.0, range.1
                    )));
                }
                for (t, s) in sum.iter_mut().enumerate() {
                    *s += normalize(r.incumbent_at(t + 1).unwrap_or(range.1), range);
                }
            }
            let n = recs.len() as f64;
            Ok(RegretCurve {
                method: method.to_string(),
                values: sum.into_iter().map(|s| s / n).collect(),
                count: recs.len(),
            })
        })
        .collect()
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCurve {
    pub method: String,
    pub values: Vec<f64>,
}

/// Mean rank per method and evaluation count, ranking methods separately
/// within every (task, seed) cell.
pub fn ranking_curves(records: &[RunRecord]) -> Result<Vec<RankCurve>> {
    let methods: BTreeSet<&str> = records.iter().map(|r| r.method.as_str()).collect();
    let methods: Vec<&str> = methods.into_iter().collect();
    let mut cells: BTreeMap<(&str, u64), BTreeMap<&str, &RunRecord>> = BTreeMap::new();
    for r in records {
        if cells.entry((&r.task, r.seed)).or_default().insert(&r.method, r).is_some() {
            return Err(Error::Config(format!("duplicate record {}", r.key())));
        }
    }
    let len = records.iter().map(|r| r.iterations.len()).max().unwrap_or(0);
    let mut sums = vec![vec![0.0; len]; methods.len()];
    for ((task, seed), cell) in &cells {
        if cell.len() != methods.len() {
            let missing: Vec<&str> = methods.iter().filter(|m| !cell.contains_key(*m)).copied().collect();
            return Err(Error::Config(format!(
                "task `{task}` seed {seed} is missing methods {missing:?}"
            )));
        }
        for t in 0..len {
            let values: Vec<f64> = methods
                .iter()
                .map(|m| cell[m].incumbent_at(t + 1).unwrap_or(f64::INFINITY))
                .collect();
            for (s, r) in sums.iter_mut().zip(average_ranks(&values)) {
                s[t] += r;
            }
        }
    }
    let n = cells.len() as f64;
    Ok(methods
        .into_iter()
        .zip(sums)
        .map(|(m, s)| RankCurve {
            method: m.to_string(),
            values: s.into_iter().map(|v| v / n).collect(),
        })
        .collect())
}

/// Inputs whose output lies within `tolerance` (relative) of the minimum.
pub fn filter_minima(data: &ObservationDataset, tolerance: f64) -> Vec<Configuration> {
    let Some(min) = data.min_output() else {
        return Vec::new();
    };
    let slack = tolerance * min.abs();
    data.inputs
        .iter()
        .zip(&data.outputs)
        .filter(|(_, &y)| y - min <= slack)
        .map(|(x, _)| x.clone())
        .collect()
}

fn distance_matrix(points: &[Configuration], space: &SearchSpace) -> Result<Vec<Vec<f64>>> {
    let enc: Vec<Vec<f64>> = points.iter().map(|p| space.encode(p)).collect::<Result<_>>()?;
    Ok(enc
        .iter()
        .map(|a| enc.iter().map(|b| space.gower_encoded(a, b)).collect())
        .collect())
}

/// Relabels so labels run from 0 in order of first appearance.
fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Complete-linkage agglomerative clustering, merging while the closest
/// pair of clusters is strictly nearer than `threshold`.
pub fn agglomerative_clusters(points: &[Configuration], space: &SearchSpace, threshold: f64) -> Result<Vec<usize>> {
    let d = distance_matrix(points, space)?;
    Ok(complete_linkage(&d, threshold))
}

pub fn complete_linkage(d: &[Vec<f64>], threshold: f64) -> Vec<usize> {
    let n = d.len();
    let mut link = d.to_vec();
    let mut active: Vec<bool> = vec![true; n];
    let mut label: Vec<usize> = (0..n).collect();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..n {
            if !active[a] {
                continue;
            }
            for b in a + 1..n {
                if active[b] && best.is_none_or(|(_, _, v)| link[a][b] < v) {
                    best = Some((a, b, link[a][b]));
                }
            }
        }
        match best {
            Some((a, b, v)) if v < threshold => {
                active[b] = false;
                for l in label.iter_mut() {
                    if *l == b {
                        *l = a;
                    }
                }
                for c in 0..n {
                    let m = link[a][c].max(link[b][c]);
                    link[a][c] = m;
                    link[c][a] = m;
                }
            }
            _ => break,
        }
    }
    canonical_labels(&label)
}

/// Spectral clustering with similarity `1 − d²`: normalised affinity
/// eigenvectors, row-normalised, then deterministic k-means. Returns `None`
/// when the affinity is degenerate.
pub fn spectral_clusters(points: &[Configuration], space: &SearchSpace, k: usize) -> Result<Option<Vec<usize>>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::Config(format!("cannot form {k} clusters from {n} points")));
    }
    if k == n {
        return Ok(Some((0..n).collect()));
    }
    let d = distance_matrix(points, space)?;
    let w = nalgebra::DMatrix::from_fn(n, n, |i, j| 1.0 - d[i][j] * d[i][j]);
    let deg: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    if deg.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Ok(None);
    }
    let norm = nalgebra::DMatrix::from_fn(n, n, |i, j| w[(i, j)] / (deg[i] * deg[j]).sqrt());
    let eig = norm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|i| order[..k].iter().map(|&c| eig.eigenvectors[(i, c)]).collect())
        .collect();
    for r in rows.iter_mut() {
        let len = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(len > 0.0) {
            return Ok(None);
        }
        r.iter_mut().for_each(|v| *v /= len);
    }
    Ok(Some(canonical_labels(&kmeans(&rows, k))))
}

/// Lloyd's algorithm from farthest-point seeds starting at row 0.
fn kmeans(rows: &[Vec<f64>], k: usize) -> Vec<usize> {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut centers = vec![rows[0].clone()];
    while centers.len() < k {
        let far = (0..rows.len())
            .max_by(|&a, &b| {
                let da = centers.iter().map(|c| dist(&rows[a], c)).fold(f64::INFINITY, f64::min);
                let db = centers.iter().map(|c| dist(&rows[b], c)).fold(f64::INFINITY, f64::min);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("rows are non-empty");
        centers.push(rows[far].clone());
    }
    let mut labels = vec![0; rows.len()];
    for _ in 0..100 {
        let next: Vec<usize> = rows
            .iter()
            .map(|r| {
                (0..k)
                    .min_by(|&a, &b| dist(r, &centers[a]).total_cmp(&dist(r, &centers[b])))
                    .expect("k >= 1")
            })
            .collect();
        let changed = next != labels;
        labels = next;
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = rows.iter().zip(&labels).filter(|(_, l)| **l == c).map(|(r, _)| r).collect();
            if members.is_empty() {
                continue;
            }
            for (d, v) in center.iter_mut().enumerate() {
                *v = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

/// Probability per task that at least one other task shares a minimum
/// cluster. `ids[task][seed]` is the set of cluster labels of that run's
/// minima. For task `i` and seed `s`: `1 − Π_{j≠i} (fraction of task j's
/// seeds whose set is disjoint from ids[i][s])`, averaged over `s`.
pub fn overlap_probability(ids: &[Vec<BTreeSet<usize>>]) -> Result<Vec<f64>> {
    if ids.len() < 2 {
        return Err(Error::Config("overlap needs at least two tasks".into()));
    }
    if ids.iter().any(Vec::is_empty) {
        return Err(Error::Config("every task needs at least one seed".into()));
    }
    Ok(ids
        .iter()
        .enumerate()
        .map(|(i, own)| {
            if own.iter().all(BTreeSet::is_empty) {
                log::warn!("task {i} has no minima points; overlap probability set to 0");
                return 0.0;
            }
            own.iter()
                .map(|mine| {
                    let product: f64 = ids
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, other)| {
                            other.iter().filter(|theirs| mine.is_disjoint(theirs)).count() as f64 / other.len() as f64
                        })
                        .product();
                    1.0 - product
                })
                .sum::<f64>()
                / own.len() as f64
        })
        .collect())
}

/// One minimum point of a historic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumPoint {
    pub task: String,
    pub seed_index: usize,
    pub config: Configuration,
}

/// Cluster label per minimum point; labels run from 0 without gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub points: Vec<MinimumPoint>,
    pub labels: Vec<usize>,
}

impl ClusterAssignment {
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Member count per cluster.
    pub fn sizes(&self) -> Vec<usize> {
        cluster_sizes(&self.labels)
    }
}

pub fn cluster_sizes(labels: &[usize]) -> Vec<usize> {
    let mut sizes = vec![0; labels.iter().max().map_or(0, |m| m + 1)];
    labels.iter().for_each(|&l| sizes[l] += 1);
    sizes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaOverlap {
    pub clusters: ClusterAssignment,
    /// Spectral labels with the same cluster count, when well defined.
    pub spectral_labels: Option<Vec<usize>>,
    pub tasks: Vec<String>,
    pub probabilities: Vec<f64>,
    pub seeds_per_task: usize,
}

/// Full overlap analysis over `historic[task][seed]`.
pub fn minima_overlap(space: &SearchSpace, historic: &[Vec<ObservationDataset>], tolerance: f64, threshold: f64) -> Result<MinimaOverlap> {
    let mut points = Vec::new();
    for runs in historic {
        for (s, data) in runs.iter().enumerate() {
            for config in filter_minima(data, tolerance) {
                points.push(MinimumPoint {
                    task: data.task_id.clone(),
                    seed_index: s,
                    config,
                });
            }
        }
    }
    let configs: Vec<Configuration> = points.iter().map(|p| p.config.clone()).collect();
    let labels = agglomerative_clusters(&configs, space, threshold)?;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let spectral_labels = if k >= 1 {
        let s = spectral_clusters(&configs, space, k)?;
        if s.is_none() {
            log::warn!("spectral clustering degenerate; using agglomerative labels only");
        }
        s
    } else {
        None
    };
    let mut ids: Vec<Vec<BTreeSet<usize>>> = historic.iter().map(|runs| vec![BTreeSet::new(); runs.len()]).collect();
    let mut p = 0;
    for (t, runs) in historic.iter().enumerate() {
        for (s, data) in runs.iter().enumerate() {
            for _ in filter_minima(data, tolerance) {
                ids[t][s].insert(labels[p]);
                p += 1;
            }
        }
    }
    let probabilities = overlap_probability(&ids)?;
    Ok(MinimaOverlap {
        clusters: ClusterAssignment { points, labels },
        spectral_labels,
        tasks: historic
            .iter()
            .map(|runs| runs.first().map(|d| d.task_id.clone()).unwrap_or_default())
            .collect(),
        probabilities,
        seeds_per_task: historic.iter().map(Vec::len).min().unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{IterationRecord, Phase};
    use crate::search_space::Variable;
    use proptest::prelude::*;

    fn record(method: &str, task: &str, seed: u64, values: &[f64]) -> RunRecord {
        let mut inc = f64::INFINITY;
        RunRecord {
            method: method.into(),
            task: task.into(),
            seed,
            budget: values.len(),
            sources: vec![],
            iterations: values
                .iter()
                .map(|&v| {
                    inc = inc.min(v);
                    IterationRecord {
                        phase: Phase::Search,
                        config: Configuration::reals(&[0.0]),
                        value: v,
                        incumbent: inc,
                        weights: None,
                        guard_mode: None,
                        mode_switched: false,
                        alpha: None,
                    }
                })
                .collect(),
            failure: None,
        }
    }

    fn sets(v: &[&[usize]]) -> Vec<BTreeSet<usize>> {
        v.iter().map(|s| s.iter().copied().collect()).collect()
    }

    #[test]
    fn regret_examples() {
        assert_eq!(normalize(0.0, (0.0, 10.0)), 0.0);
        assert_eq!(normalize(10.0, (0.0, 10.0)), 1.0);
        assert_eq!(normalize(2.5, (0.0, 10.0)), 0.25);
        let recs = vec![record("a", "t", 0, &[10.0, 2.5, 5.0]), record("a", "t", 1, &[0.0, 0.0, 0.0])];
        let ranges = HashMap::from([("t".to_string(), (0.0, 10.0))]);
        let c = normalized_regret(&recs, &ranges).unwrap();
        assert_eq!(c[0].values, vec![0.5, 0.125, 0.125]);
        assert_eq!(c[0].count, 2);
        assert!(normalized_regret(&recs, &HashMap::new()).is_err());
        let empirical = task_ranges(&recs, &HashMap::new());
        assert_eq!(empirical["t"], (0.0, 10.0));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(average_ranks(&[5.0, 3.0, 9.0]), vec![2.0, 1.0, 3.0]);
        assert_eq!(average_ranks(&[1.0, 1.0]), vec![1.5, 1.5]);
        let recs = vec![
            record("a", "t", 0, &[1.0, 1.0]),
            record("b", "t", 0, &[2.0, 1.0]),
        ];
        let c = ranking_curves(&recs).unwrap();
        assert_eq!(c[0].values, vec![1.0, 1.5]);
        assert_eq!(c[1].values, vec![2.0, 1.5]);
        assert!(ranking_curves(&[recs[0].clone(), record("b", "t", 1, &[1.0])]).is_err());
    }

    #[test]
    fn minima_filtering() {
        let cfg = |x: f64| Configuration::reals(&[x]);
        let d = ObservationDataset::from_pairs("t", vec![cfg(0.1), cfg(0.2), cfg(0.3)], vec![1.0, 0.5, 0.5]).unwrap();
        assert_eq!(filter_minima(&d, 1e-9), vec![cfg(0.2), cfg(0.3)]);
        let d = ObservationDataset::from_pairs("t", vec![cfg(0.1), cfg(0.2)], vec![0.5, 0.5 + 1e-12]).unwrap();
        assert_eq!(filter_minima(&d, 0.0), vec![cfg(0.1)]);
        assert_eq!(filter_minima(&d, 1e-9).len(), 2);
    }

    fn brute_complete_linkage(d: &[Vec<f64>], threshold: f64) -> Vec<usize> {
        let mut clusters: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
        loop {
            let mut best: Option<(usize, usize, f64)> = None;
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let link = clusters[a]
                        .iter()
                        .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                        .map(|(i, j)| d[i][j])
                        .fold(0.0, f64::max);
                    if best.is_none_or(|(_, _, v)| link < v) {
                        best = Some((a, b, link));
                    }
                }
            }
            match best {
                Some((a, b, v)) if v < threshold => {
                    let moved = clusters.remove(b);
                    clusters[a].extend(moved);
                }
                _ => break,
            }
        }
        let mut labels = vec![0; d.len()];
        for (c, members) in clusters.iter().enumerate() {
            for &i in members {
                labels[i] = c;
            }
        }
        canonical_labels(&labels)
    }

    fn line() -> SearchSpace {
        SearchSpace::new(vec![Variable::continuous("x", 0.0, 1.0)]).unwrap()
    }

    #[test]
    fn agglomerative_examples() {
        let space = line();
        let same = vec![Configuration::reals(&[0.4]); 3];
        assert_eq!(agglomerative_clusters(&same, &space, 0.02).unwrap(), vec![0, 0, 0]);
        // 1-d Gower distance is sqrt(|Δx|): 0.25 apart → 0.5.
        let two = vec![Configuration::reals(&[0.25]), Configuration::reals(&[0.5])];
        assert_eq!(agglomerative_clusters(&two, &space, 0.02).unwrap(), vec![0, 1]);
        // Gower distances sqrt(Δx): chain 0, 1e-4, 2e-4 has pairwise 0.01,
        // 0.01, 0.0141: complete linkage keeps them together at 0.02.
        let pts: Vec<Configuration> = [0.0, 1e-4, 2e-4, 0.5, 0.5001].iter().map(|&x| Configuration::reals(&[x])).collect();
        let labels = agglomerative_clusters(&pts, &space, 0.02).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 1, 1]);
        let d = distance_matrix(&pts, &space).unwrap();
        assert_eq!(labels, brute_complete_linkage(&d, 0.02));
    }

    #[test]
    fn spectral_examples() {
        let space = line();
        let pts: Vec<Configuration> = [0.1, 0.1, 0.1, 0.9, 0.9].iter().map(|&x| Configuration::reals(&[x])).collect();
        assert_eq!(spectral_clusters(&pts, &space, 2).unwrap().unwrap(), vec![0, 0, 0, 1, 1]);
        assert_eq!(spectral_clusters(&pts, &space, 5).unwrap().unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(spectral_clusters(&pts, &space, 6).is_err());
    }

    #[test]
    fn overlap_examples() {
        let p = overlap_probability(&[sets(&[&[0]]), sets(&[&[0]])]).unwrap();
        assert_eq!(p, vec![1.0, 1.0]);
        let p = overlap_probability(&[sets(&[&[0]]), sets(&[&[1]])]).unwrap();
        assert_eq!(p, vec![0.0, 0.0]);
        let p = overlap_probability(&[sets(&[&[0]]), sets(&[&[0]]), sets(&[&[2]])]).unwrap();
        assert_eq!(p, vec![1.0, 1.0, 0.0]);
        // Two seeds per task; only the seed-0 runs share cluster 0.
        let p = overlap_probability(&[sets(&[&[0], &[5]]), sets(&[&[0], &[1]])]).unwrap();
        assert_eq!(p[0], 0.25);
        assert_eq!(p[1], 0.25);
        let p = overlap_probability(&[sets(&[&[]]), sets(&[&[1]])]).unwrap();
        assert_eq!(p, vec![0.0, 0.0]);
        assert!(overlap_probability(&[sets(&[&[0]])]).is_err());
    }

    #[test]
    fn minima_overlap_end_to_end() {
        let space = line();
        let cfg = |x: f64| Configuration::reals(&[x]);
        let d = |id: &str, xs: &[f64], ys: &[f64]| {
            ObservationDataset::from_pairs(id, xs.iter().map(|&x| cfg(x)).collect(), ys.to_vec()).unwrap()
        };
        let historic = vec![
            vec![d("a", &[0.1, 0.5], &[0.0, 1.0])],
            vec![d("b", &[0.1, 0.9], &[0.0, 1.0])],
            vec![d("c", &[0.9, 0.1], &[0.0, 1.0])],
        ];
        let o = minima_overlap(&space, &historic, 1e-9, 0.02).unwrap();
        assert_eq!(o.clusters.labels, vec![0, 0, 1]);
        assert_eq!(o.probabilities, vec![1.0, 1.0, 0.0]);
        assert_eq!(o.clusters.n_clusters(), 2);
        assert_eq!(o.clusters.sizes(), vec![2, 1]);
        assert_eq!(o.spectral_labels.as_deref(), Some(&[0, 0, 1][..]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn complete_linkage_cut_property(xs in proptest::collection::vec(0.0..0.002f64, 1..25)) {
            let space = line();
            let pts: Vec<Configuration> = xs.iter().map(|&x| Configuration::reals(&[x])).collect();
            let labels = agglomerative_clusters(&pts, &space, 0.02).unwrap();
            let d = distance_matrix(&pts, &space).unwrap();
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    if labels[i] == labels[j] {
                        prop_assert!(d[i][j] <= 0.02);
                    }
                }
            }
            prop_assert_eq!(labels, brute_complete_linkage(&d, 0.02));
        }

        #[test]
        fn rank_sums(cells in proptest::collection::vec(proptest::collection::vec(prop_oneof![Just(1.0), Just(2.0), 0.0..5.0f64], 1..6), 1..10)) {
            for values in cells {
                let m = values.len() as f64;
                let sum: f64 = average_ranks(&values).iter().sum();
                prop_assert!((sum - m * (m + 1.0) / 2.0).abs() < 1e-9);
            }
        }

        #[test]
        fn overlap_bounded(ids in proptest::collection::vec(
            proptest::collection::vec(proptest::collection::btree_set(0usize..4, 0..3), 1..4), 2..5)) {
            for p in overlap_probability(&ids).unwrap() {
                prop_assert!((0.0..=1.0).contains(&p));
            }
            // Relabelling cluster ids leaves the result unchanged.
            let relabeled: Vec<Vec<BTreeSet<usize>>> = ids.iter()
                .map(|t| t.iter().map(|s| s.iter().map(|l| 3 - l).collect()).collect())
                .collect();
            prop_assert_eq!(overlap_probability(&ids).unwrap(), overlap_probability(&relabeled).unwrap());
        }

        #[test]
        fn regret_curves_bounded_and_monotone(
            runs in proptest::collection::vec(proptest::collection::vec(-10.0..10.0f64, 5), 1..6)
        ) {
            let recs: Vec<RunRecord> = runs.iter().enumerate().map(|(s, v)| record("m", "t", s as u64, v)).collect();
            let ranges = task_ranges(&recs, &HashMap::new());
            prop_assume!(ranges["t"].1 > ranges["t"].0);
            let c = &normalized_regret(&recs, &ranges).unwrap()[0];
            prop_assert!(c.values.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(c.values.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
