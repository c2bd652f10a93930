use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dgms(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgms"))
        .current_dir(dir)
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = dgms(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const SMALL: [&str; 6] = ["--rgcn-dim", "8", "--agg-dim", "8", "--input-dim", "8"];

fn pipeline(dir: &Path, threads: &str) {
    ok(dir, &["corpus", "synth", "--count", "30", "--seed", "5", "--out", "raw.jsonl"]);
    ok(dir, &["corpus", "build", "--in", "raw.jsonl", "--out", "corpus.jsonl"]);
    let mut train = vec![
        "train", "--in", "corpus.jsonl", "--checkpoint", "ck.json", "--epochs", "2", "--batch", "4", "--log",
        "log.jsonl", "--threads", threads,
    ];
    train.extend(SMALL);
    ok(dir, &train);
    ok(dir, &["index", "build", "--in", "corpus.jsonl", "--checkpoint", "ck.json", "--index", "idx"]);
    ok(
        dir,
        &[
            "evaluate", "--in", "corpus.jsonl", "--checkpoint", "ck.json", "--index", "idx", "--pool-size", "8",
            "--out", "report.json", "--pools", "pools.json",
        ],
    );
}

#[test]
fn help_and_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dgms(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(dgms(dir.path(), &["train", "--help"]).status.code(), Some(0));
    assert_eq!(dgms(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(dgms(dir.path(), &["train", "--epochs", "many"]).status.code(), Some(1));
    // train without --checkpoint is a usage problem, not a data one
    fs::write(dir.path().join("c.jsonl"), "").unwrap();
    assert_eq!(dgms(dir.path(), &["train", "--in", "c.jsonl"]).status.code(), Some(1));
}

#[test]
fn missing_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dgms(dir.path(), &["evaluate", "--in", "absent.jsonl", "--checkpoint", "ck.json"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(last["error"]["kind"], "io");
}

#[test]
fn malformed_minilang_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.ml"), "x = (1 +\n").unwrap();
    let out = dgms(dir.path(), &["graph", "code", "--in", "bad.ml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn graph_code_prints_program_graph() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.ml"), "x = 1\ny = x + 2\nprint(y)\n").unwrap();
    let out = ok(dir.path(), &["graph", "code", "--in", "p.ml"]);
    let g: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!g["nodes"].as_array().unwrap().is_empty());
    assert!(!g["edges"].as_array().unwrap().is_empty());
}

#[test]
fn graph_text_uses_given_parse() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.txt"), "Configure the window size").unwrap();
    fs::write(
        dir.path().join("d.parse"),
        "(ROOT (S (VP (VB Configure) (NP (DT the) (NN window) (NN size)))))",
    )
    .unwrap();
    let out = ok(dir.path(), &["graph", "text", "--in", "d.txt", "--parse", "d.parse"]);
    let g: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(g["nodes"].as_array().unwrap().len(), 8);
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["gradcheck", "--cases", "3", "--seed", "2"]);
    let first = String::from_utf8_lossy(&out.stdout);
    let summary: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert!(summary["max_rel_error"].as_f64().unwrap() < 1e-4);
}

#[test]
fn end_to_end_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d, "2");
    let log = fs::read_to_string(d.join("log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("report.json")).unwrap()).unwrap();
    let mrr = report["mrr"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&mrr));
    assert_eq!(report["pool_size"], 8);

    let out = ok(
        d,
        &[
            "search", "--in", "corpus.jsonl", "--checkpoint", "ck.json", "--index", "idx", "--query",
            "add price and tax", "--top-k", "3", "--json",
        ],
    );
    let hits: Vec<(String, f32)> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(hits.len(), 3);
    assert!(hits.windows(2).all(|w| w[0].1 >= w[1].1));

    // index built from other parameters is refused
    let mut retrain = vec![
        "train", "--in", "corpus.jsonl", "--checkpoint", "ck2.json", "--epochs", "1", "--seed", "9",
    ];
    retrain.extend(SMALL);
    ok(d, &retrain);
    let out = dgms(
        d,
        &["evaluate", "--in", "corpus.jsonl", "--checkpoint", "ck2.json", "--index", "idx"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fingerprint"));
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), "1");
    pipeline(b.path(), "3");
    for file in ["corpus.jsonl", "ck.json", "report.json", "pools.json", "idx/manifest.json", "idx/000000.json"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file} differs"
        );
    }
}

#[test]
fn config_file_paths_are_relative_to_it() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("cfg");
    fs::create_dir(&sub).unwrap();
    fs::write(sub.join("run.json"), r#"{"seed": 4, "output": "raw.jsonl"}"#).unwrap();
    ok(dir.path(), &["corpus", "synth", "--count", "5", "--config", "cfg/run.json"]);
    let text = fs::read_to_string(sub.join("raw.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 5);

    fs::write(sub.join("bad.json"), r#"{"sede": 4}"#).unwrap();
    let out = dgms(dir.path(), &["corpus", "synth", "--config", "cfg/bad.json"]);
    assert_eq!(out.status.code(), Some(2));
}
