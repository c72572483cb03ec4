use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn discobench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_discobench"))
        .args(args)
        .env_remove("DISCOBENCH_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("campaign.yaml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "systems:\n  - {elements: [Fe, Al], max_atoms: 4}\n\
                     policies:\n  - {name: random}\n  - {name: diversity, planner: {kind: diversity}}\n\
                     baseline: random\nepisodes: 2\nbudget: 6\nseed: 3\noutput: out\n";

#[test]
fn validate_accepts_the_shipped_config() {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/quickstart.yaml");
    let out = discobench(&["validate", config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("2 systems, 3 policies, 2 epsilons, 36 cells"), "{text}");
}

#[test]
fn invalid_configs_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "policies: [{name: random}]\nbaseline: random\nbogus_key: 1\n",
        "systems: [{elements: [Fe, Al]}]\npolicies: [{name: random}]\nbaseline: missing\n",
        "systems: [{elements: [Fe, Al]}]\npolicies: [{name: random}]\nbaseline: random\nbudget: 0\n",
    ] {
        let config = write_config(dir.path(), body);
        let out = discobench(&["validate", &config]);
        assert_eq!(out.status.code(), Some(1), "{body}");
    }
}

#[test]
fn run_writes_the_run_directory_and_metrics_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = discobench(&["run", &config, "--workers", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("out");
    for f in ["manifest.json", "metrics.csv", "aggregate.csv", "af_series.csv", "timings.csv", "curves.csv"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    assert_eq!(fs::read_dir(run.join("episodes")).unwrap().count(), 4);
    let metrics = fs::read(run.join("metrics.csv")).unwrap();

    let out = discobench(&["metrics", run.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read(run.join("metrics.csv")).unwrap(), metrics);

    let out = discobench(&["plot-data", run.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(run.join("phase_diagrams")).unwrap().count(), 4);

    let other = dir.path().join("other");
    let out = discobench(&["run", &config, "--workers", "2", "--output", other.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read(other.join("metrics.csv")).unwrap(), metrics);
}

#[test]
fn missing_run_directory_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(discobench(&["metrics", missing.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(discobench(&["plot-data", missing.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn sample_systems_prints_distinct_sorted_systems() {
    let out = discobench(&["sample-systems", "--size", "3", "--count", "4", "--seed", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    let lines: Vec<&str> = text.lines().filter(|l| l.contains("elements")).collect();
    assert_eq!(lines.len(), 4);
    let mut unique = lines.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), 4);
    assert_eq!(text, String::from_utf8_lossy(&discobench(&["sample-systems", "--size", "3", "--count", "4", "--seed", "5"]).stdout));

    let pool = discobench(&["sample-systems", "--size", "2", "--count", "1", "--pool", "Fe,Al"]);
    assert!(String::from_utf8_lossy(&pool.stdout).contains("elements: [Al, Fe]"));
    let too_many = discobench(&["sample-systems", "--size", "3", "--count", "2", "--pool", "Fe,Al,Ni"]);
    assert_eq!(too_many.status.code(), Some(1));
    let bad = discobench(&["sample-systems", "--size", "2", "--count", "1", "--pool", "Fe,Qq"]);
    assert_eq!(bad.status.code(), Some(1));
}
