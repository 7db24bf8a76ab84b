mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use common::{rgpe_warm, snapshot, standard_bo, synthetic_config};
use tlbo::{Experiment, ExperimentConfig};

fn experiment(dir: &Path, json: &str, workers: usize) -> Experiment {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    Experiment::new(cfg, dir.join("out"), workers)
}

#[test]
fn full_cycle_counts_resume_and_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let methods = format!("{},{}", standard_bo("bo", 12), rgpe_warm("rgpe_ws", 12));
    let exp = experiment(dir.path(), &synthetic_config(&methods, "0, 1"), 2);

    assert!(exp.run().unwrap_err().to_string().contains("generate-historic"));
    let files = exp.generate_historic().unwrap();
    assert_eq!(files.len(), 6);
    let historic = snapshot(&exp.out.join("historic"));

    let s = exp.run().unwrap();
    assert_eq!((s.executed, s.skipped), (12, 0));
    assert!(s.failed.is_empty());
    assert_eq!(snapshot(&exp.out.join("records")).len(), 12);
    let records = snapshot(&exp.out.join("records"));

    // Completed cells are never recomputed.
    let s = exp.run().unwrap();
    assert_eq!((s.executed, s.skipped), (0, 12));
    // A lost record is rerun and reproduced exactly.
    let victim = exp.record_path("rgpe_ws__quadratic_1__1");
    fs::remove_file(&victim).unwrap();
    let s = exp.run().unwrap();
    assert_eq!((s.executed, s.skipped), (1, 11));
    assert_eq!(snapshot(&exp.out.join("records")), records);

    let written = exp.analyze().unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for f in ["regret.csv", "rank.csv", "overlap.csv", "clusters.csv"] {
        assert!(names.iter().any(|n| n == f), "{f} missing from {names:?}");
    }
    let first = snapshot(&exp.analysis_dir());
    exp.analyze().unwrap();
    assert_eq!(snapshot(&exp.analysis_dir()), first);

    let regret = String::from_utf8(first["regret.csv"].clone()).unwrap();
    assert_eq!(regret.lines().count(), 1 + 2 * 12);
    let overlap = String::from_utf8(first["overlap.csv"].clone()).unwrap();
    assert_eq!(overlap.lines().count(), 4);
    assert!(overlap.lines().skip(1).all(|l| l.ends_with(",2")));

    // Regenerating historic data under the same master seed is identical.
    exp.generate_historic().unwrap();
    assert_eq!(snapshot(&exp.out.join("historic")), historic);
}

#[test]
fn single_method_analysis_omits_rank_table() {
    let dir = tempfile::tempdir().unwrap();
    let exp = experiment(dir.path(), &synthetic_config(&standard_bo("bo", 11), "0"), 1);
    let s = exp.run().unwrap();
    assert_eq!(s.executed, 3);
    let written = exp.analyze().unwrap();
    assert!(written.iter().any(|p| p.ends_with("regret.csv")));
    assert!(!written.iter().any(|p| p.ends_with("rank.csv")));
}

#[test]
fn worker_count_does_not_change_records() {
    let methods = format!("{},{}", standard_bo("bo", 11), rgpe_warm("rgpe_ws", 11));
    let json = synthetic_config(&methods, "3, 4");
    let mut snaps = Vec::new();
    for workers in [1, 4] {
        let dir = tempfile::tempdir().unwrap();
        let exp = experiment(dir.path(), &json, workers);
        exp.generate_historic().unwrap();
        exp.run().unwrap();
        snaps.push(snapshot(&exp.out.join("records")));
    }
    assert_eq!(snaps[0].len(), 12);
    assert_eq!(snaps[0], snaps[1]);
}

#[test]
fn cartpole_historic_files() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{
        "schema_version": 1,
        "benchmark": {"kind": "cartpole", "n_tasks": 5},
        "methods": [{"id": "bo", "init_mode": "random_10", "weighting": "standard_bo"}],
        "seeds": [0]
    }"#;
    let exp = experiment(dir.path(), json, 1);
    let files = exp.generate_historic().unwrap();
    assert_eq!(files.len(), 5);
    for f in &files {
        let text = fs::read_to_string(f).unwrap();
        let rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
        assert_eq!(rows, 50, "{}", f.display());
        assert!(text.contains("# master_seed: 0"));
    }
    assert!(exp.out.join("family.csv").is_file());
}

fn tlbo(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tlbo"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn binary_subcommands_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, synthetic_config(&standard_bo("bo", 11), "0")).unwrap();
    let out = dir.path().join("out");
    let (cfg, out) = (cfg.to_str().unwrap(), out.to_str().unwrap());

    let o = tlbo(&["run", "--config", cfg, "--out", out, "--workers", "2", "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = tlbo(&["analyze", "--config", cfg, "--out", out, "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Path::new(out).join("analysis/regret.csv").is_file());

    // Asking warm start for more points than the historic pool holds fails
    // every transfer cell; the process must exit nonzero.
    let bad = r#"{"id": "ws", "init_mode": "warm_start_2", "init_points": 500, "weighting": {"strategy": "rgpe"}, "budget": 500}"#;
    let bad_cfg = dir.path().join("bad.json");
    fs::write(&bad_cfg, synthetic_config(bad, "0")).unwrap();
    let bad_cfg = bad_cfg.to_str().unwrap();
    let o = tlbo(&["generate-historic", "--config", bad_cfg, "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = tlbo(&["run", "--config", bad_cfg, "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("3 cells failed"));

    let o = tlbo(&["run", "--config", "/nonexistent/config.json"]);
    assert!(!o.status.success());
}
