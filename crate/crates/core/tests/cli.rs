use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cosched::generate::{random_problem, synthetic_trace, RandomSpec, TraceSpec};
use cosched::model::Problem;
use cosched::tracesim::{write_trace_csv, Trace};
use serde_json::Value;

fn cosched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cosched")).args(args).output().unwrap()
}

fn write_problem(dir: &Path, name: &str, p: &Problem) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, p.to_json().unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_well_formed_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_problem(dir.path(), "p.json", &random_problem(1, &RandomSpec::small()));
    assert_eq!(cosched(&["validate", s(&path)]).status.code(), Some(0));
}

#[test]
fn structural_errors_exit_one_and_bad_json_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = random_problem(1, &RandomSpec::small());
    let ids: Vec<String> = p.dags[0].tasks.iter().map(|t| t.task_id.clone()).collect();
    p.dags[0].edges = vec![(ids[0].clone(), ids[1].clone()), (ids[1].clone(), ids[0].clone())];
    let path = write_problem(dir.path(), "cycle.json", &p);
    let out = cosched(&["validate", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cycle"));

    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{\"dags\": 3}").unwrap();
    assert_eq!(cosched(&["validate", s(&junk)]).status.code(), Some(3));
}

#[test]
fn weight_out_of_range_is_usage_error() {
    let out = cosched(&["optimize", "whatever.json", "--weight", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside [0, 1]"));
}

#[test]
fn optimize_output_validates_and_gantt_rows_match() {
    let dir = tempfile::tempdir().unwrap();
    let p = random_problem(8, &RandomSpec::small());
    let path = write_problem(dir.path(), "p.json", &p);
    let out = dir.path().join("sol.json");
    let hist = dir.path().join("hist.jsonl");
    let r = cosched(&[
        "optimize",
        s(&path),
        "--goal",
        "cost",
        "--restarts",
        "3",
        "--out",
        s(&out),
        "--history",
        s(&hist),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["weight"], 0.0);
    assert!(doc["energy"].as_f64().unwrap() <= 1e-12);
    assert!(std::fs::read_to_string(&hist).unwrap().lines().count() >= 1);
    assert_eq!(
        cosched(&["validate", s(&path), "--schedule", s(&out)]).status.code(),
        Some(0)
    );

    let gantt = cosched(&["baseline", s(&path), "--method", "critical-path", "--format", "csv"]);
    let text = String::from_utf8(gantt.stdout).unwrap();
    assert!(text.starts_with("dag_id,task_id,start,end,option,"));
    assert_eq!(text.lines().count(), p.task_count() + 1);
}

#[test]
fn tampered_schedule_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let p = random_problem(8, &RandomSpec::small());
    let path = write_problem(dir.path(), "p.json", &p);
    let out = dir.path().join("sol.json");
    assert_eq!(cosched(&["oracle", s(&path), "--out", s(&out)]).status.code(), Some(0));
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    doc["cost"] = Value::from(doc["cost"].as_f64().unwrap() + 1.0);
    std::fs::write(&out, doc.to_string()).unwrap();
    assert_eq!(
        cosched(&["validate", s(&path), "--schedule", s(&out)]).status.code(),
        Some(1)
    );
}

#[test]
fn oracle_sweep_is_pareto_monotone() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..5 {
        let path = write_problem(dir.path(), "p.json", &random_problem(seed, &RandomSpec::small()));
        let out = cosched(&["sweep", s(&path), "--weights", "0,0.5,1", "--oracle"]);
        assert_eq!(out.status.code(), Some(0));
        let docs: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(docs.len(), 3);
        let pts: Vec<(f64, f64)> = docs
            .iter()
            .map(|d| (d["makespan"].as_f64().unwrap(), d["cost"].as_f64().unwrap()))
            .collect();
        for w in pts.windows(2) {
            assert!(
                w[1].0 <= w[0].0 + 1e-9 && w[1].1 >= w[0].1 - 1e-9,
                "seed {seed}: {pts:?}"
            );
        }
    }
}

#[test]
fn oracle_cap_overflow_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_problem(dir.path(), "p.json", &random_problem(2, &RandomSpec::small()));
    let out = cosched(&["oracle", s(&path), "--oracle-cap", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds the cap"));
}

#[test]
fn simulate_writes_report_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let trace = Trace::from_tasks(synthetic_trace(
        2,
        &TraceSpec {
            dags: 4,
            tasks: 20,
            mean_interarrival: 60.0,
        },
    ))
    .unwrap();
    let path = dir.path().join("trace.csv");
    write_trace_csv(&trace, std::fs::File::create(&path).unwrap()).unwrap();
    let report = dir.path().join("report.json");
    let cmp = dir.path().join("cdf.csv");
    let out = cosched(&[
        "simulate",
        s(&path),
        "--machines",
        "1",
        "--interval",
        "600",
        "--out",
        s(&report),
        "--compare-out",
        s(&cmp),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["per_dag"].as_array().unwrap().len(), 4);
    assert_eq!(r["scheduler_label"], "co_optimize");
    let c: Value = serde_json::from_str(&std::fs::read_to_string(&cmp).unwrap()).unwrap();
    assert_eq!(c["cdf"].as_array().unwrap().len(), 4);
}

#[test]
fn predict_lists_every_configuration() {
    let out = cosched(&[
        "predict",
        "--beta",
        "0.2",
        "--observed-nodes",
        "4",
        "--observed-duration",
        "85",
        "--node-counts",
        "4,8",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let opts: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(opts.len(), 8);
    // anchored at 85 s on 4 nodes: 8 nodes take 152.5 s
    assert_eq!(opts[0]["duration"], 85.0);
    assert_eq!(opts[1]["duration"], 153.0);
}
