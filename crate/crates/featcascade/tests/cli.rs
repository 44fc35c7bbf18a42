use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use featcascade::dataset::load_dataset;
use featcascade::pipeline::{graph_to_json, load_graph};
use featcascade::workload::SyntheticWorkloadSpec;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_featcascade"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_workload(dir: &Path, n: usize) {
    fs::write(
        dir.join("w.json"),
        serde_json::to_string(&SyntheticWorkloadSpec::planted(n, 3)).unwrap(),
    )
    .unwrap();
}

#[test]
fn generate_then_analyze_writes_groups_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_workload(d, 1000);
    let o = run(&["generate", "--workload", "w.json", "--out", "gen"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let text = fs::read_to_string(d.join("gen/pipeline.json")).unwrap();
    let graph = load_graph(&text).unwrap();
    assert_eq!(load_graph(&graph_to_json(&graph)).unwrap(), graph);
    let data = load_dataset(&d.join("gen/data.csv")).unwrap();
    assert_eq!(data.row_count(), 1000);
    assert_eq!(data.column_names().len(), 6);

    let o = run(
        &[
            "analyze",
            "--pipeline",
            "gen/pipeline.json",
            "--data",
            "gen/data.csv",
            "--out",
            "res",
        ],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.join("res/groups.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "group_id,columns,cost_us,importance");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,g0_c0;g0_c1,5,"), "{}", lines[1]);
    assert!(
        lines[2].starts_with("1,g1_c0;g1_c1;g1_c2;g1_c3,45,"),
        "{}",
        lines[2]
    );
}

#[test]
fn bench_predictions_reproduce_reported_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_workload(d, 3000);
    let o = run(
        &["train-cascade", "--workload", "w.json", "--out", "res"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(
        &[
            "bench",
            "--workload",
            "w.json",
            "--config",
            "res/cascade.json",
            "--mode",
            "batch",
            "--repetitions",
            "1",
            "--out",
            "res",
            "--latency-csv",
            "res/lat.csv",
        ],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let mut reader = csv::Reader::from_path(d.join("res/predictions.csv")).unwrap();
    let (mut n, mut right) = (0usize, 0usize);
    for rec in reader.records() {
        let rec = rec.unwrap();
        let p: f64 = rec[1].parse().unwrap();
        let l: f64 = rec[2].parse().unwrap();
        n += 1;
        right += usize::from(p == l);
    }
    assert_eq!(n, 600);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("res/bench.json")).unwrap()).unwrap();
    let reported = report["optimized"]["accuracy"].as_f64().unwrap();
    assert!((reported - right as f64 / n as f64).abs() < 1e-12);
    assert!(d.join("res/lat.csv").is_file());
}

#[test]
fn unreachable_target_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write_workload(dir.path(), 1000);
    let o = run(
        &[
            "train-cascade",
            "--workload",
            "w.json",
            "--accuracy-target",
            "1.01",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 3);
    assert!(!dir.path().join("cascade.json").exists());
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_workload(d, 400);
    fs::write(d.join("p.json"), "{}").unwrap();

    let missing = run(
        &["analyze", "--pipeline", "p.json", "--data", "nope.csv"],
        d,
    );
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.csv"));

    let linear = run(
        &["train-cascade", "--workload", "w.json", "--model", "linear"],
        d,
    );
    assert_eq!(code(&linear), 2);

    let no_n = run(&["train-topk", "--workload", "w.json"], d);
    assert_eq!(code(&no_n), 2);

    let too_big = run(
        &["train-topk", "--workload", "w.json", "--n-dist", "[5000]"],
        d,
    );
    assert_eq!(code(&too_big), 2);

    let both = run(
        &[
            "train-cascade",
            "--workload",
            "w.json",
            "--accuracy-target",
            "0.9",
            "--accuracy-delta",
            "0.01",
        ],
        d,
    );
    assert_eq!(code(&both), 2);
}

#[test]
fn manifest_fields_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_workload(d, 1000);
    fs::write(
        d.join("run.json"),
        r#"{"workload": "w.json", "accuracy_target": 1.01, "out": "m"}"#,
    )
    .unwrap();
    assert_eq!(
        code(&run(&["train-cascade", "--manifest", "run.json"], d)),
        3
    );
    let o = run(
        &[
            "train-cascade",
            "--manifest",
            "run.json",
            "--accuracy-target",
            "0.5",
        ],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("m/cascade.json").is_file());
}
