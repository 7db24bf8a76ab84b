//! Plain CSV tables written by `analyze`.
//!
//! | file | columns |
//! |------|---------|
//! | `regret.csv` | method, evaluations, mean_normalized_regret, n_records |
//! | `rank.csv` | method, evaluations, mean_rank |
//! | `normalization.csv` | task, min, max, source (`known` or `empirical`) |
//! | `overlap.csv` | task, probability, n_seeds |
//! | `clusters.csv` | task, seed_index, cluster, spectral_cluster, one column per variable |
//! | `cluster_sizes.csv` | cluster, agglomerative_size, spectral_size |

use std::collections::{BTreeMap, HashMap};

use anyhow::Result;
use tlbo_core::analysis::{cluster_sizes, MinimaOverlap, RankCurve, RegretCurve};
use tlbo_core::SearchSpace;

fn table<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner()?)
}

pub fn regret_csv(curves: &[RegretCurve]) -> Result<Vec<u8>> {
    table(
        &["method", "evaluations", "mean_normalized_regret", "n_records"],
        curves.iter().flat_map(|c| {
            c.values
                .iter()
                .enumerate()
                .map(move |(t, v)| vec![c.method.clone(), (t + 1).to_string(), v.to_string(), c.count.to_string()])
        }),
    )
}

pub fn rank_csv(curves: &[RankCurve]) -> Result<Vec<u8>> {
    table(
        &["method", "evaluations", "mean_rank"],
        curves.iter().flat_map(|c| {
            c.values
                .iter()
                .enumerate()
                .map(move |(t, v)| vec![c.method.clone(), (t + 1).to_string(), v.to_string()])
        }),
    )
}

pub fn normalization_csv(ranges: &HashMap<String, (f64, f64)>, known: &HashMap<String, (f64, f64)>) -> Result<Vec<u8>> {
    let sorted: BTreeMap<&String, &(f64, f64)> = ranges.iter().collect();
    table(
        &["task", "min", "max", "source"],
        sorted.into_iter().map(|(task, (lo, hi))| {
            let source = if known.contains_key(task) { "known" } else { "empirical" };
            vec![task.clone(), lo.to_string(), hi.to_string(), source.to_string()]
        }),
    )
}

pub fn overlap_csv(o: &MinimaOverlap) -> Result<Vec<u8>> {
    table(
        &["task", "probability", "n_seeds"],
        o.tasks
            .iter()
            .zip(&o.probabilities)
            .map(|(t, p)| vec![t.clone(), p.to_string(), o.seeds_per_task.to_string()]),
    )
}

pub fn clusters_csv(o: &MinimaOverlap, space: &SearchSpace) -> Result<Vec<u8>> {
    let mut header = vec!["task", "seed_index", "cluster", "spectral_cluster"];
    header.extend(space.variables().iter().map(|v| v.name.as_str()));
    table(
        &header,
        o.clusters.points.iter().enumerate().map(|(i, p)| {
            let mut row = vec![
                p.task.clone(),
                p.seed_index.to_string(),
                o.clusters.labels[i].to_string(),
                o.spectral_labels.as_ref().map_or_else(String::new, |s| s[i].to_string()),
            ];
            row.extend(p.config.values().iter().map(ToString::to_string));
            row
        }),
    )
}

pub fn cluster_sizes_csv(o: &MinimaOverlap) -> Result<Vec<u8>> {
    let agg = o.clusters.sizes();
    let spec = o.spectral_labels.as_deref().map(cluster_sizes);
    table(
        &["cluster", "agglomerative_size", "spectral_size"],
        agg.iter().enumerate().map(|(c, n)| {
            vec![
                c.to_string(),
                n.to_string(),
                spec.as_ref().and_then(|s| s.get(c)).map_or_else(String::new, ToString::to_string),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regret_table_layout() {
        let c = vec![RegretCurve {
            method: "bo".into(),
            values: vec![1.0, 0.25],
            count: 3,
        }];
        let text = String::from_utf8(regret_csv(&c).unwrap()).unwrap();
        assert_eq!(
            text,
            "method,evaluations,mean_normalized_regret,n_records\nbo,1,1,3\nbo,2,0.25,3\n"
        );
    }

    #[test]
    fn normalization_marks_source() {
        let ranges = HashMap::from([("b".to_string(), (0.0, 2.0)), ("a".to_string(), (1.0, 3.5))]);
        let known = HashMap::from([("b".to_string(), (0.0, 2.0))]);
        let text = String::from_utf8(normalization_csv(&ranges, &known).unwrap()).unwrap();
        assert_eq!(text, "task,min,max,source\na,1,3.5,empirical\nb,0,2,known\n");
    }
}
