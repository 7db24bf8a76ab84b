#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

/// Relative path → bytes for every file under `dir` (optionally one subdir).
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return out;
    }
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Small synthetic experiment: 3 shifted quadratics, quick acquisition.
pub fn synthetic_config(methods: &str, seeds: &str) -> String {
    format!(
        r#"{{
        "schema_version": 1,
        "master_seed": 11,
        "benchmark": {{"kind": "synthetic", "family": "shifted_quadratic", "n_tasks": 3, "shift_range": 1.0}},
        "methods": [{methods}],
        "seeds": [{seeds}],
        "historic": {{"n_evals": 12, "n_seeds": 2, "acquisition": {{"n_random_candidates": 100, "n_local_steps": 3}}}}
    }}"#
    )
}

pub const QUICK_ACQ: &str = r#""acquisition": {"n_random_candidates": 100, "n_local_steps": 3}"#;

pub fn standard_bo(id: &str, budget: usize) -> String {
    format!(r#"{{"id": "{id}", "init_mode": "random_10", "weighting": "standard_bo", "budget": {budget}, {QUICK_ACQ}}}"#)
}

pub fn rgpe_warm(id: &str, budget: usize) -> String {
    format!(
        r#"{{"id": "{id}", "init_mode": "warm_start_2", "weighting": {{"strategy": "rgpe", "bootstrap_samples": 50}}, "guard": "weight_dilution", "budget": {budget}, {QUICK_ACQ}}}"#
    )
}
