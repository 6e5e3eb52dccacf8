mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{healthy, MockServer, Reply};

const BIN: &str = env!("CARGO_BIN_EXE_summrank");

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("SUMMRANK_CACHE_DIR", dir.join("cache"))
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) {
    let out = run(args, dir);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn synth(dir: &Path, docs: usize, k: usize) -> PathBuf {
    let d = docs.to_string();
    let k = k.to_string();
    ok(&["synth", "--out", "corpus.jsonl", "--docs", &d, "--k", &k, "--synth-seed", "3"], dir);
    dir.join("corpus.jsonl")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn pipeline_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 12, 6);
    ok(&["pipeline", "--corpus", "corpus.jsonl", "--out-dir", "a", "--export"], dir.path());
    ok(&["pipeline", "--corpus", "corpus.jsonl", "--out-dir", "b", "--export"], dir.path());
    ok(&["--threads", "1", "pipeline", "--corpus", "corpus.jsonl", "--out-dir", "c", "--export"], dir.path());
    let a = files(&dir.path().join("a"));
    assert_eq!(a.len(), 11, "{:?}", a.iter().map(|f| &f.0).collect::<Vec<_>>());
    assert_eq!(a, files(&dir.path().join("b")));
    assert_eq!(a, files(&dir.path().join("c")));
}

#[test]
fn stages_one_by_one_match_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 10, 4);
    ok(&["pipeline", "--corpus", "corpus.jsonl", "--out-dir", "all", "--export"], dir.path());
    let steps: [&[&str]; 6] = [
        &["features", "--corpus", "corpus.jsonl", "--out", "s/features.jsonl"],
        &["pseudo-targets", "--corpus", "corpus.jsonl", "--out", "s/pseudo_targets.jsonl"],
        &[
            "estimate",
            "--corpus",
            "corpus.jsonl",
            "--features",
            "s/features.jsonl",
            "--pseudo-targets",
            "s/pseudo_targets.jsonl",
            "--out",
            "s/coefficients.json",
            "--log",
            "s/estimation_log.csv",
        ],
        &[
            "rerank",
            "--features",
            "s/features.jsonl",
            "--coefficients",
            "s/coefficients.json",
            "--out",
            "s/selection.jsonl",
        ],
        &[
            "evaluate",
            "--corpus",
            "corpus.jsonl",
            "--features",
            "s/features.jsonl",
            "--selection",
            "s/selection.jsonl",
            "--out-dir",
            "s",
        ],
        &["export-labels", "--corpus", "corpus.jsonl", "--selection", "s/selection.jsonl", "--out", "s/labels.jsonl"],
    ];
    for step in steps {
        ok(step, dir.path());
    }
    assert_eq!(files(&dir.path().join("all")), files(&dir.path().join("s")));
}

#[test]
fn overrides_change_the_config_digest() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 6, 3);
    ok(&["pseudo-targets", "--corpus", "corpus.jsonl", "--out", "a.jsonl"], dir.path());
    ok(&["--pseudo", "salient-r2", "pseudo-targets", "--corpus", "corpus.jsonl", "--out", "b.jsonl"], dir.path());
    let a = fs::read_to_string(dir.path().join("a.jsonl")).unwrap();
    let b = fs::read_to_string(dir.path().join("b.jsonl")).unwrap();
    let header = |s: &str| serde_json::from_str::<serde_json::Value>(s.lines().next().unwrap()).unwrap();
    assert_ne!(header(&a)["provenance"]["config_digest"], header(&b)["provenance"]["config_digest"]);
    assert_eq!(header(&b)["provenance"]["config"]["pseudo"]["method"], "salient-r2");
    assert!(b.lines().nth(1).unwrap().contains("\"method\":\"salient-r2\""));
}

#[test]
fn empty_pool_is_a_validation_error_naming_the_document() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.jsonl"),
        "{\"id\":\"ok-1\",\"source\":\"One. Two.\",\"candidates\":[\"One.\"]}\n{\"id\":\"empty-7\",\"source\":\"One. Two.\",\"candidates\":[]}\n",
    )
    .unwrap();
    let out = run(&["pipeline", "--corpus", "bad.jsonl", "--out-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("empty-7"), "{stderr}");
    assert!(stderr.contains(":2:"), "{stderr}");
    assert!(!dir.path().join("out/features.jsonl").exists());
}

#[test]
fn bad_config_and_missing_files_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 3, 2);
    fs::write(dir.path().join("bad.toml"), "[estimation]\nrestart_probability = 2.0\n").unwrap();
    let out = run(&["--config", "bad.toml", "features", "--corpus", "corpus.jsonl", "--out", "f.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["features", "--corpus", "missing.jsonl", "--out", "f.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out =
        run(&["--strategies", "first,best", "features", "--corpus", "corpus.jsonl", "--out", "f.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

fn remote_config(dir: &Path, url: &str) {
    let text = format!(
        "[features]\nsemantic = [\"builtin-lexical\", \"bertscore\"]\n\n[scorers.bertscore]\nendpoint = \"{url}\"\nbackoff_ms = 5\n"
    );
    fs::write(dir.join("remote.toml"), text).unwrap();
}

#[test]
fn remote_scores_flow_into_features_and_the_cache() {
    let server = MockServer::start(healthy(&["bertscore"], 0));
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 30, 5);
    remote_config(dir.path(), &server.url);
    ok(&["--config", "remote.toml", "features", "--corpus", "corpus.jsonl", "--out", "f1.jsonl"], dir.path());
    // 150 pairs: three score requests.
    assert_eq!(server.score_requests(), 3);
    ok(&["--config", "remote.toml", "features", "--corpus", "corpus.jsonl", "--out", "f2.jsonl"], dir.path());
    assert_eq!(server.score_requests(), 3, "second run is served from the cache");
    let f1 = fs::read(dir.path().join("f1.jsonl")).unwrap();
    assert_eq!(f1, fs::read(dir.path().join("f2.jsonl")).unwrap());
    let header: serde_json::Value =
        serde_json::from_str(std::str::from_utf8(&f1).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["features"][4], "bertscore");
    assert_eq!(header["scorers"][1]["name"], "bertscore");
    assert!(dir.path().join("cache/bertscore@1/scores.log").exists());
}

#[test]
fn scorer_failure_exits_3_without_partial_output() {
    let inner = healthy(&["bertscore"], 0);
    let server = MockServer::start(move |n, req| {
        if req.path == "/v1/score" {
            Reply::Json(503, serde_json::json!({"error": "overloaded"}))
        } else {
            inner(n, req)
        }
    });
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 4, 3);
    remote_config(dir.path(), &server.url);
    let out = run(&["--config", "remote.toml", "pipeline", "--corpus", "corpus.jsonl", "--out-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let written: Vec<_> = fs::read_dir(dir.path().join("out")).unwrap().collect();
    assert!(written.is_empty(), "{written:?}");
}

#[test]
fn service_without_the_metric_is_rejected() {
    let server = MockServer::start(healthy(&["bartscore"], 0));
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 2, 2);
    remote_config(dir.path(), &server.url);
    let out = run(&["--config", "remote.toml", "features", "--corpus", "corpus.jsonl", "--out", "f.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(server.score_requests(), 0);
}

#[test]
fn corpus_without_references_skips_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.jsonl"),
        "{\"id\":\"a\",\"source\":\"The cat sat. The dog ran. A bird sang. Rain fell.\",\"candidates\":[\"The cat sat.\",\"Rain fell on the dog.\"]}\n",
    )
    .unwrap();
    ok(&["pipeline", "--corpus", "c.jsonl", "--out-dir", "out", "--export"], dir.path());
    assert!(dir.path().join("out/selection.jsonl").exists());
    assert!(dir.path().join("out/labels.jsonl").exists());
    assert!(!dir.path().join("out/report.csv").exists());
}

#[test]
fn strategy_flag_selects_report_rows() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 8, 4);
    ok(
        &[
            "--pseudo",
            "lead3",
            "--strategies",
            "first,random,oracle,summscore",
            "pipeline",
            "--corpus",
            "corpus.jsonl",
            "--out-dir",
            "out",
        ],
        dir.path(),
    );
    let rows: Vec<summrank::stages::ReportRow> =
        summrank::formats::read_csv(&dir.path().join("out/report.csv")).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.strategy.as_str()).collect();
    assert_eq!(names, ["first", "random", "oracle", "summscore"]);
    assert_eq!(rows[0].gain_pct, Some(0.0));
    let text = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("strategy"));
}
