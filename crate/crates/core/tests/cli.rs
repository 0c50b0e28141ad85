//! The command-line tool: verdicts, exit codes and output formats.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use bnnverify::bench::load_dataset;
use bnnverify::property::{robustness_property, Norm};
use common::FIXTURES;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bnnverify"))
        .args(args)
        .env_remove("BNNVERIFY_WORKERS")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn fx(name: &str) -> String {
    format!("{FIXTURES}/{name}")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn verify_exit_codes() {
    let holds = run(&["verify", "--model", &fx("toy_222.json"), "--property", &fx("toy_holds.json")]);
    assert_eq!(holds.status.code(), Some(0));
    assert_eq!(stdout(&holds).lines().next(), Some("HOLDS"));

    let cex = run(&["verify", "--model", &fx("toy_222.json"), "--property", &fx("toy_cex.json")]);
    assert_eq!(cex.status.code(), Some(1));
    let text = stdout(&cex);
    assert!(text.starts_with("COUNTEREXAMPLE\n"));
    assert!(text.contains("logits: [0.0,3.0]"), "{text}");
}

#[test]
fn jsonl_counterexample_carries_recomputed_logits() {
    let o = run(&[
        "verify",
        "--model",
        &fx("toy_222.json"),
        "--property",
        &fx("toy_cex.json"),
        "--format",
        "jsonl",
        "--no-timings",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["verdict"], "COUNTEREXAMPLE");
    assert!(v["time_s"].is_null());
    let x: Vec<f64> = serde_json::from_value(v["input"].clone()).unwrap();
    let m = bnnverify::model::Model::load(&common::fixture("toy_222.json")).unwrap();
    assert_eq!(serde_json::to_value(m.forward(&x).unwrap()).unwrap(), v["logits"]);
}

#[test]
fn usage_and_input_errors() {
    assert_eq!(run(&["verify", "--model", &fx("toy_222.json")]).status.code(), Some(10));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(10));
    let bad_timeout = run(&[
        "verify",
        "--model",
        &fx("toy_222.json"),
        "--property",
        &fx("toy_holds.json"),
        "--timeout",
        "-1",
    ]);
    assert_eq!(bad_timeout.status.code(), Some(10));
    // a property document is not a model
    let wrong = run(&["verify", "--model", &fx("toy_holds.json"), "--property", &fx("toy_holds.json")]);
    assert_eq!(wrong.status.code(), Some(11));
    let missing = run(&["verify", "--model", "/nonexistent/m.json", "--property", &fx("toy_holds.json")]);
    assert_eq!(missing.status.code(), Some(12));
    // a 2-input property against the 784-input model
    let dims = run(&["verify", "--model", &fx("mnist_bnn.json"), "--property", &fx("toy_holds.json")]);
    assert_eq!(dims.status.code(), Some(11));
    assert!(String::from_utf8_lossy(&dims.stderr).contains("dimension"));
}

/// A robustness query on the MNIST fixture that takes far longer than the
/// limits used below.
fn hard_property(dir: &Path) -> String {
    let data = load_dataset(&std::fs::read_to_string(fx("mnist_test.jsonl")).unwrap()).unwrap();
    let row = &data[69];
    let prop = robustness_property(&row.input, row.label, 10, 0.1, Norm::LInf).unwrap();
    let path = dir.join("hard.json");
    std::fs::write(&path, prop.save()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn timeout_and_node_limit() {
    let dir = tempfile::tempdir().unwrap();
    let prop = hard_property(dir.path());
    let model = fx("mnist_bnn.json");
    let t = run(&["verify", "--model", &model, "--property", &prop, "--timeout", "0.1"]);
    assert_eq!(t.status.code(), Some(2), "{}", stdout(&t));
    assert_eq!(stdout(&t).lines().next(), Some("TIMEOUT"));
    let n = run(&["verify", "--model", &model, "--property", &prop, "--max-nodes", "5"]);
    assert_eq!(n.status.code(), Some(3));
    assert_eq!(stdout(&n).lines().next(), Some("UNKNOWN"));
}

#[test]
fn bench_jsonl_is_deterministic_without_timings() {
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<String> = (0..2)
        .map(|i| {
            let out = dir.path().join(format!("run{i}.jsonl"));
            let o = run(&[
                "bench",
                "--model",
                &fx("mnist_bnn.json"),
                "--dataset",
                &fx("mnist_test.jsonl"),
                "--count",
                "3",
                "--epsilon",
                "0.02",
                "--no-timings",
                "--format",
                "jsonl",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
            std::fs::read_to_string(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    let report = bnnverify::bench::BenchmarkReport::from_jsonl(&outs[0]).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert!(report.rows.iter().all(|r| r.time_s.is_none()));
}

#[test]
fn bench_skip_mode_is_labeled() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let o = run(&[
        "bench",
        "--model",
        &fx("toy_222.json"),
        "--dataset",
        empty.to_str().unwrap(),
        "--skip-misclassified",
    ]);
    // an empty dataset still produces a report
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("misclassified images skipped"), "{text}");
    assert!(text.contains("mean_time_s n/a"));
}

#[test]
fn encode_eval_inspect() {
    let o = run(&["encode", "--model", &fx("toy_222.json"), "--property", &fx("toy_holds.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("Minimize\n"));

    let o = run(&["eval", "--model", &fx("toy_222.json"), "--input", "[-1, 1]"]);
    assert_eq!(stdout(&o).trim(), "[0.0,3.0]");

    let o = run(&["eval", "--model", &fx("mnist_bnn.json"), "--dataset", &fx("mnist_test.jsonl")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().last().unwrap().starts_with("accuracy 0."));

    let o = run(&["inspect", "--model", &fx("toy_222.json"), "--property", &fx("toy_cex.json")]);
    let text = stdout(&o);
    assert!(text.contains("block 2: sign 2 -> 2"));
    assert!(text.contains("4 binary"), "{text}");
}

#[test]
fn idx_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("img.idx");
    let labels = dir.path().join("lbl.idx");
    let mut img = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 3];
    img.extend([0u8, 200, 255]);
    std::fs::write(&images, img).unwrap();
    std::fs::write(&labels, [0u8, 0, 8, 1, 0, 0, 0, 1, 4]).unwrap();
    let out = dir.path().join("d.jsonl");
    let o = run(&[
        "idx2jsonl",
        "--images",
        images.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--threshold",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = load_dataset(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].input, vec![-1.0, 1.0, 1.0]);
    assert_eq!(rows[0].label, 4);
}
