use std::path::Path;
use std::process::Command;

use heisenberg_tdvp::bench::{self, ConfigPatch, ExperimentConfig, Scheme};

const SMALL: &str = "\
sites = 4
seed = 11
init-bond-dim = 2
max-bond-dims = 1,9,20,9,1
t-final = 1/8
tau-grid = 1/16, 1/32, 1/64
";

fn small_config(dir: &Path, extra: &str) -> ExperimentConfig {
    let mut patch = ConfigPatch::parse(&format!("{SMALL}{extra}")).unwrap();
    patch.output_dir = Some(dir.to_path_buf());
    patch.resolve().unwrap()
}

/// CSV rows with the wall-time column blanked.
fn rows_without_timing(csv: &str) -> Vec<String> {
    csv.lines()
        .skip(1)
        .map(|line| {
            let mut cols: Vec<&str> = line.split(',').collect();
            cols[6] = "";
            cols.join(",")
        })
        .collect()
}

#[test]
fn artifacts_have_the_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let exp = bench::run_experiment(&cfg).unwrap();
    assert!(exp.failures.is_empty());

    let csv = std::fs::read_to_string(dir.path().join(bench::RESULTS_CSV)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "tau,mode,rel_energy_error,trace_distance,norm_drift,superop_energy_drift,wall_time_seconds,seed"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        assert_eq!(row.len(), 8);
        assert!(row[1] == "standard" || row[1] == "augmented");
        for col in [0, 2, 3, 4, 5, 6] {
            assert!(row[col].parse::<f64>().unwrap() >= 0.0);
        }
        assert_eq!(row[7], "11");
    }

    let schmidt = std::fs::read_to_string(dir.path().join(bench::SCHMIDT_CSV)).unwrap();
    let mut lines = schmidt.lines();
    assert_eq!(lines.next().unwrap(), "time_label,index,coefficient");
    let labels: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels.iter().filter(|&&l| l == "t=0").count(), 81);
    assert_eq!(labels.iter().filter(|&&l| l == "t=0.125").count(), 81);

    for name in [bench::MANIFEST, bench::SUMMARY_TXT, bench::SUMMARY_JSON] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(bench::SUMMARY_JSON)).unwrap()).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 6);
}

#[test]
fn runs_are_deterministic_and_the_manifest_reproduces_them() {
    let first = tempfile::tempdir().unwrap();
    let cfg = small_config(first.path(), "mode = augmented\n");
    bench::run_experiment(&cfg).unwrap();
    let csv1 = std::fs::read_to_string(first.path().join(bench::RESULTS_CSV)).unwrap();

    let second = tempfile::tempdir().unwrap();
    let mut patch = ConfigPatch::from_file(first.path().join(bench::MANIFEST)).unwrap();
    patch.output_dir = Some(second.path().to_path_buf());
    let replay = patch.resolve().unwrap();
    assert_eq!(replay.tau_grid, cfg.tau_grid);
    assert_eq!(replay.max_bond_dims, cfg.max_bond_dims);
    bench::run_experiment(&replay).unwrap();
    let csv2 = std::fs::read_to_string(second.path().join(bench::RESULTS_CSV)).unwrap();
    assert_eq!(rows_without_timing(&csv1), rows_without_timing(&csv2));
    // Re-running in the first directory hits the cached reference.
    bench::run_experiment(&cfg).unwrap();
    let csv3 = std::fs::read_to_string(first.path().join(bench::RESULTS_CSV)).unwrap();
    assert_eq!(rows_without_timing(&csv1), rows_without_timing(&csv3));
}

#[test]
fn standard_mode_and_step_size_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "mode = standard\nworkers = 2\n");
    let exp = bench::compute(&cfg, None).unwrap();
    assert!(exp.records.iter().all(|r| r.mode == Scheme::Standard));
    assert_eq!(exp.records.len(), 3);
    let by_tau = |tau: f64| exp.records.iter().find(|r| r.tau == tau).unwrap().trace_distance;
    assert!(by_tau(1.0 / 16.0) > by_tau(1.0 / 64.0));
    for r in &exp.records {
        assert!(r.norm_drift < 1e-9 && r.superop_energy_drift < 1e-8);
    }
}

#[test]
fn binary_merges_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = dir.path().join("run.cfg");
    std::fs::write(&config, format!("{SMALL}mode = augmented\noutput-dir = /nonexistent/ignored\n")).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_tdvp-bench"))
        .arg("--config")
        .arg(&config)
        .args(["--mode", "standard", "--tau-grid", "1/16,1/32"])
        .arg("--output-dir")
        .arg(&out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert!(stdout.contains("convergence order"));
    let csv = std::fs::read_to_string(out.join(bench::RESULTS_CSV)).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("standard")));

    let bad = Command::new(env!("CARGO_BIN_EXE_tdvp-bench"))
        .args(["--sites", "9"])
        .arg("--output-dir")
        .arg(dir.path().join("bad"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
