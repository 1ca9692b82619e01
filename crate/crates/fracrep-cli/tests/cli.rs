//! Drives the installed binary end to end on a synthetic scenario.

use std::fs;
use std::process::Command;

fn write_config(
    dir: &std::path::Path,
    name: &str,
    out_dir: &std::path::Path,
) -> std::path::PathBuf {
    let config = format!(
        r#"
[input]
kind = "synthetic"

[input.scenario]
households = 150
min_household_size = 1
max_household_size = 3
items = 1
point_donors = 1
variance_donors = 2
strata = 6
groups_per_stratum = 2
scheme = "delta-grouped"
poverty_threshold = 14000.0
seed = 9

[[input.scenario.cells]]
mean = 30000.0
sd = 9000.0

[[input.scenario.cells]]
mean = 52000.0
sd = 15000.0

[input.scenario.design]
kind = "srs"
sample_households = 60

[input.scenario.response]
kind = "mcar"
rate = 0.25

[input.scenario.domain]
kind = "single"

[imputation]
point_donors = 1
variance_donors = 2

[imputation.metric]
blocking = ["cell"]

[[imputation.metric.numeric]]
name = "x"
scale = 1.0

[replication]
strata = 6
groups_per_stratum = 2
scheme = "delta-grouped"

[[estimators]]
kind = "total-income"

[[estimators]]
kind = "poverty-count"

[output]
dir = {out:?}
"#,
        out = out_dir.to_str().unwrap()
    );
    let path = dir.join(name);
    fs::write(&path, config).unwrap();
    path
}

#[test]
fn binary_runs_a_synthetic_config_to_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path(), "run.toml", &out_dir);

    let output = Command::new(env!("CARGO_BIN_EXE_fracrep"))
        .args(["--config", config.to_str().unwrap(), "--threads", "1"])
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("total_income:"), "{stdout}");
    assert!(stdout.contains("poverty_count:"), "{stdout}");
    assert!(out_dir.join("reports.csv").exists());
    assert!(out_dir.join("report.txt").exists());

    // Stop at imputation: donor lists only, no reports.
    let out_stage = dir.path().join("stage_out");
    let config_staged = write_config(dir.path(), "staged.toml", &out_stage);
    let output = Command::new(env!("CARGO_BIN_EXE_fracrep"))
        .args([
            "--config",
            config_staged.to_str().unwrap(),
            "--stage",
            "impute",
        ])
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    assert!(out_stage.join("donors.csv").exists());
    assert!(!out_stage.join("reports.csv").exists());
}

#[test]
fn binary_fails_cleanly_on_missing_config() {
    let output = Command::new(env!("CARGO_BIN_EXE_fracrep"))
        .args(["--config", "/nonexistent/run.toml"])
        .output()
        .expect("binary runs");
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("run.toml"), "{stderr}");
}

#[test]
fn binary_rejects_unknown_stage() {
    let output = Command::new(env!("CARGO_BIN_EXE_fracrep"))
        .args(["--config", "x.toml", "--stage", "simmer"])
        .output()
        .expect("binary runs");
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("simmer"), "{stderr}");
}
