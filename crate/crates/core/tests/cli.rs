use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use n2sid::cli::data::{read_record, record_to_csv};
use n2sid::model::IoRecord;
use n2sid::synth;
use nalgebra::{DMatrix, DVector};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_n2sid"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, name: &str, samples: usize, seed: u64) -> PathBuf {
    let out = dir.join(name);
    let o = run(&[
        "simulate", "--example", "siso2", "--samples", &samples.to_string(), "--seed", &seed.to_string(),
        "--out", p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    out
}

fn load(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Identifies on the first 120 samples of a noise-free siso2 record and
/// validates on the next 200.
fn identified(dir: &Path) -> (PathBuf, PathBuf) {
    let data = simulate(dir, "d.csv", 320, 3);
    let report = dir.join("r.json");
    let o = run(&[
        "identify", "--data", p(&data), "--inputs", "1", "--outputs", "1", "--s", "10", "--n-ide", "120",
        "--n-val", "200", "--detrend", "false", "--report", p(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    (data, report)
}

fn aggregate_vaf(out: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with("aggregate")).expect("aggregate line");
    line.rsplit(' ').next().unwrap().parse().unwrap()
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read(simulate(dir.path(), "a.csv", 50, 9)).unwrap();
    let b = std::fs::read(simulate(dir.path(), "b.csv", 50, 9)).unwrap();
    let c = std::fs::read(simulate(dir.path(), "c.csv", 50, 10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn noise_free_simulation_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let rec = read_record(&simulate(dir.path(), "d.csv", 80, 1), Some(1), Some(1)).unwrap();
    let model = synth::example_model("siso2").unwrap();
    let y = model.simulate(&rec.u, &DVector::zeros(2)).unwrap();
    assert!((y - &rec.y).amax() <= 1e-12);
}

#[test]
fn identify_recovers_noise_free_system() {
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = identified(dir.path());
    let r = load(&report);
    let run = &r["runs"][0];
    assert_eq!(run["order"], 2);
    assert_eq!(run["n_ide"], 120);
    assert!(run["vaf_validation"].as_f64().unwrap() >= 99.9);
    assert_eq!(run["model"]["a"]["rows"], 2);
    assert_eq!(run["grid"]["lambda"].as_array().unwrap().len(), 20);
}

#[test]
fn validate_reproduces_reported_vaf() {
    let dir = tempfile::tempdir().unwrap();
    let (data, report) = identified(dir.path());
    let rec = read_record(&data, None, None).unwrap();
    let val = dir.path().join("v.csv");
    std::fs::write(&val, record_to_csv(&rec.slice(120, 200).unwrap())).unwrap();
    let o = run(&["validate", "--report", p(&report), "--data", p(&val)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let reported = load(&report)["runs"][0]["vaf_validation"].as_f64().unwrap();
    assert!((aggregate_vaf(&stdout(&o)) - reported).abs() <= 1e-9);
}

#[test]
fn validate_on_data_from_the_reported_model() {
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = identified(dir.path());
    let own = dir.path().join("own.csv");
    let o = run(&["simulate", "--model", p(&report), "--samples", "150", "--seed", "4", "--out", p(&own)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["validate", "--report", p(&report), "--data", p(&own), "--x0", "zero"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!((aggregate_vaf(&stdout(&o)) - 100.0).abs() <= 1e-6);
}

#[test]
fn validate_aggregate_matches_library_vaf() {
    let dir = tempfile::tempdir().unwrap();
    let (data, report) = identified(dir.path());
    let o = run(&["validate", "--report", p(&report), "--data", p(&data), "--x0", "zero"]);
    assert_eq!(o.status.code(), Some(0));
    let model = n2sid::cli::report::ModelJson::to_model(
        &serde_json::from_value(load(&report)["runs"][0]["model"].clone()).unwrap(),
    )
    .unwrap();
    let rec = read_record(&data, None, None).unwrap();
    let yhat = model.simulate(&rec.u, &DVector::zeros(model.n())).unwrap();
    let expected = n2sid::model::vaf(&rec.y, &yhat).unwrap();
    assert!((aggregate_vaf(&stdout(&o)) - expected).abs() <= 1e-9);
}

#[test]
fn mismatched_output_count_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = identified(dir.path());
    let two = dir.path().join("two.csv");
    let rec = IoRecord::new(DMatrix::from_element(30, 1, 1.0), DMatrix::from_fn(30, 2, |i, j| (i + j) as f64)).unwrap();
    std::fs::write(&two, record_to_csv(&rec)).unwrap();
    let o = run(&["validate", "--report", p(&report), "--data", p(&two)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_data_file_exits_two_and_names_it() {
    let o = run(&["identify", "--data", "/no/such/file.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/file.csv"));
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(run(&["identify"]).status.code(), Some(2));
    assert_eq!(run(&["identify", "--data", "x.csv", "--order", "zero"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn overflowing_data_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("big.csv");
    let rec = IoRecord::new(
        DMatrix::from_fn(40, 1, |i, _| if i % 3 == 0 { 1e200 } else { -1e200 }),
        DMatrix::from_fn(40, 1, |i, _| if i % 2 == 0 { 1e200 } else { -3e200 }),
    )
    .unwrap();
    std::fs::write(&data, record_to_csv(&rec)).unwrap();
    let o = run(&["identify", "--data", p(&data), "--s", "4", "--grid", "2", "--detrend", "false"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn fixed_order_applies_to_every_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "d.csv", 100, 2);
    let report = dir.path().join("r.json");
    let o = run(&[
        "identify", "--data", p(&data), "--s", "6", "--grid", "5", "--order", "3", "--report", p(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = load(&report);
    assert_eq!(r["runs"][0]["order"], 3);
    for o in r["runs"][0]["grid"]["order"].as_array().unwrap() {
        assert_eq!(o, 3);
    }
}

#[test]
fn output_only_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("y.csv");
    let o = run(&["simulate", "--example", "siso1-ar", "--samples", "300", "--noise-std", "1", "--out", p(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = dir.path().join("r.json");
    let o = run(&[
        "identify", "--data", p(&data), "--output-only", "--s", "6", "--grid", "6", "--n-val", "100", "--report",
        p(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = load(&report);
    assert_eq!(r["runs"][0]["model"]["m"], 0);
    assert_eq!(r["runs"][0]["scoring"], "prediction");
    assert!(r["runs"][0]["vaf_validation"].as_f64().is_some());
}

fn key_paths(v: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let path = format!("{prefix}.{k}");
                out.insert(path.clone());
                key_paths(x, &path, out);
            }
        }
        Value::Array(items) => {
            for x in items {
                key_paths(x, &format!("{prefix}[]"), out);
            }
        }
        _ => {}
    }
}

#[test]
fn report_schema_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = identified(dir.path());
    let mut paths = BTreeSet::new();
    key_paths(&load(&report), "$", &mut paths);
    let actual: Vec<String> = paths.into_iter().collect();
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/report_schema.txt");
    let golden = std::fs::read_to_string(&golden_path).unwrap();
    let expected: Vec<&str> = golden.lines().filter(|l| !l.is_empty()).collect();
    assert_eq!(actual, expected, "report schema changed; update {}", golden_path.display());
}

#[test]
fn n2sid_threads_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "d.csv", 80, 5);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (threads, path) in [("1", &a), ("3", &b)] {
        let o = bin()
            .env("N2SID_THREADS", threads)
            .args(["identify", "--data", p(&data), "--s", "5", "--grid", "4", "--report", p(path)])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    // identical results up to wall-clock timings
    let strip = |mut v: Value| {
        v["runs"][0].as_object_mut().unwrap().remove("timings");
        v
    };
    assert_eq!(strip(load(&a)), strip(load(&b)));
}
