//! End-to-end runs of the `propweight` binary.

use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_propweight"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Rows `y, x1, x2, w` with every design weight 1.
fn write_self_paired(path: &Path, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("y,x1,x2,w\n");
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = rng.random_range(0.0..2.0);
        let x2 = f64::from(u8::from(rng.random_bool(0.4)));
        let y = 1.0 + 0.5 * x1 - x2 + rng.random_range(-1.0..1.0);
        ys.push(y);
        writeln!(text, "{y},{x1},{x2},1").unwrap();
    }
    std::fs::write(path, text).unwrap();
    ys
}

fn write_pair(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut cohort = String::from("y,x1,x2\n");
    for _ in 0..300 {
        let x1: f64 = rng.random_range(0.5..2.5);
        let x2: f64 = rng.random_range(0.0..1.0);
        writeln!(cohort, "{},{x1},{x2}", 2.0 * x1 + x2 + rng.random_range(-0.5..0.5)).unwrap();
    }
    let mut survey = String::from("x1,x2,w,stratum,psu\n");
    for i in 0..400 {
        let x1: f64 = rng.random_range(0.0..2.0);
        let x2: f64 = rng.random_range(0.0..1.0);
        let w = rng.random_range(20.0..60.0);
        writeln!(survey, "{x1},{x2},{w},s{},p{}", i % 4, i % 3).unwrap();
    }
    let c = dir.join("cohort.csv");
    let s = dir.join("survey.csv");
    std::fs::write(&c, cohort).unwrap();
    std::fs::write(&s, survey).unwrap();
    (c, s)
}

#[test]
fn self_paired_weights_are_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("self.csv");
    let ys = write_self_paired(&data, 250, 5);
    let out = dir.path().join("report.json");
    let weights = dir.path().join("weights.csv");
    let res = run(&[
        "estimate",
        "--cohort",
        path_str(&data),
        "--survey",
        path_str(&data),
        "--outcome",
        "y",
        "--covariates",
        "x1,x2",
        "--weight",
        "w",
        "--methods",
        "ALP",
        "--out",
        path_str(&out),
        "--dump-weights",
        path_str(&weights),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let est = report["rows"][0]["estimate"].as_f64().unwrap();
    assert!((est - mean).abs() <= 1e-6, "{est} vs {mean}");

    let mut rdr = csv::Reader::from_path(&weights).unwrap();
    let mut count = 0;
    for rec in rdr.records() {
        let w: f64 = rec.unwrap()[1].parse().unwrap();
        assert!((w - 1.0).abs() <= 1e-6);
        count += 1;
    }
    assert_eq!(count, ys.len());
}

#[test]
fn report_rows_follow_requested_order() {
    let dir = tempfile::tempdir().unwrap();
    let (c, s) = write_pair(dir.path());
    let res = run(&[
        "estimate",
        "--cohort",
        path_str(&c),
        "--survey",
        path_str(&s),
        "--outcome",
        "y",
        "--covariates",
        "x1,x2",
        "--weight",
        "w",
        "--methods",
        "ALP.S,Naive,CLW,ALP,FDW,RDW",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8(res.stdout).unwrap();
    let methods: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["ALP.S", "Naive", "CLW", "ALP", "FDW", "RDW"]);
}

#[test]
fn stratified_design_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (c, s) = write_pair(dir.path());
    let res = run(&[
        "estimate",
        "--cohort",
        path_str(&c),
        "--survey",
        path_str(&s),
        "--outcome",
        "y",
        "--covariates",
        "x1,x2",
        "--weight",
        "w",
        "--design",
        "stratified",
        "--strata",
        "stratum",
        "--psu",
        "psu",
        "--methods",
        "ALP,CLW",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn missing_column_yields_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let (c, s) = write_pair(dir.path());
    let res = run(&[
        "estimate",
        "--cohort",
        path_str(&c),
        "--survey",
        path_str(&s),
        "--outcome",
        "y",
        "--covariates",
        "x1,x9",
        "--weight",
        "w",
    ]);
    assert!(!res.status.success());
    let line = String::from_utf8(res.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["error"], "MissingColumn");
    assert!(v["message"].as_str().unwrap().contains("x9"));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(
        &cfg,
        "population_size = 5000\nreplicates = 20\nfc_grid = [0.05, 0.2]\nseed = 17\n",
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let res = run(&["simulate", "--config", path_str(&cfg), "--out", path_str(out)]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let (ra, rb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!ra.is_empty());
    assert_eq!(ra, rb);

    let other = dir.path().join("c.csv");
    let res = run(&[
        "simulate",
        "--config",
        path_str(&cfg),
        "--seed",
        "18",
        "--out",
        path_str(&other),
    ]);
    assert!(res.status.success());
    assert_ne!(std::fs::read(&other).unwrap(), ra);
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "replicates = 1\n").unwrap();
    let res = run(&["simulate", "--config", path_str(&cfg)]);
    assert!(!res.status.success());
    let v: serde_json::Value = serde_json::from_str(String::from_utf8(res.stderr).unwrap().trim()).unwrap();
    assert!(v["error"].is_string());
}
