mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn langgps(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_langgps"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = langgps(dir, args);
    assert!(
        out.status.success(),
        "langgps {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path(), 300, 3, 8, 1);
    ok(
        dir.path(),
        &["score", "--corpus", "corpus.jsonl", "--embeddings", "embeddings.bin", "--out", "scores.csv"],
    );
    dir
}

fn first_line(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).unwrap();
    serde_json::from_str(text.lines().next().unwrap()).unwrap()
}

#[test]
fn score_writes_csv_and_manifest() {
    let dir = fixture();
    let csv = std::fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("id,lang,a,b,s,nearest_lang"));
    assert_eq!(csv.lines().count(), 301);
    let manifest: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("scores.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["subcommand"], "score");
    let inputs = manifest["inputs"].as_object().unwrap();
    assert!(inputs.contains_key("corpus.jsonl") && inputs.contains_key("embeddings.bin"));
    assert!(inputs["corpus.jsonl"].as_str().unwrap().starts_with("0x"));
}

#[test]
fn score_reports_summary_on_stderr() {
    let dir = fixture();
    let out = ok(
        dir.path(),
        &["score", "--corpus", "corpus.jsonl", "--embeddings", "embeddings.bin", "--out", "s2.csv"],
    );
    let err = stderr(&out);
    assert!(err.contains("N=300") && err.contains("L=3") && err.contains("mean s="), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(langgps(dir.path(), &["score"]).status.code(), Some(2));
    assert_eq!(langgps(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let both = [
        "select", "--corpus", "c", "--method", "rand", "--fraction", "0.1", "--count", "3", "--out", "p",
    ];
    assert_eq!(langgps(dir.path(), &both).status.code(), Some(2));
}

#[test]
fn alignment_mismatch_exits_one() {
    let dir = fixture();
    let other = common::samples(300, 3, 2);
    let mut renamed = other.clone();
    renamed[0].id = "renamed".into();
    common::write_corpus(&renamed, &dir.path().join("other.jsonl"));
    let out = langgps(
        dir.path(),
        &["validate", "--corpus", "other.jsonl", "--embeddings", "embeddings.bin"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("alignment hash mismatch"), "{}", stderr(&out));
}

#[test]
fn validate_accepts_matching_pair() {
    let dir = fixture();
    let out = ok(
        dir.path(),
        &["validate", "--corpus", "corpus.jsonl", "--embeddings", "embeddings.bin"],
    );
    assert!(stderr(&out).starts_with("ok: 300 samples"));
}

#[test]
fn unknown_method_lists_valid_ones() {
    let dir = fixture();
    let out = langgps(
        dir.path(),
        &["select", "--corpus", "corpus.jsonl", "--method", "best", "--count", "3", "--out", "p"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    for m in ["rand", "kmc", "mtld", "dsir", "external"] {
        assert!(err.contains(m), "{err}");
    }
}

#[test]
fn missing_seed_is_an_error() {
    let dir = fixture();
    let out = langgps(
        dir.path(),
        &["select", "--corpus", "corpus.jsonl", "--method", "rand", "--count", "3", "--out", "p"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--seed"));
    let out = langgps(
        dir.path(),
        &["curriculum", "--corpus", "corpus.jsonl", "--scores", "scores.csv", "--order", "balanced", "--out", "c"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn target_larger_than_pool_is_an_error() {
    let dir = fixture();
    let out = langgps(
        dir.path(),
        &[
            "select", "--corpus", "corpus.jsonl", "--method", "mtld", "--rho", "10", "--scores",
            "scores.csv", "--count", "100", "--out", "p",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn inline_rho_matches_pool_file() {
    let dir = fixture();
    let p = dir.path();
    ok(p, &["preselect", "--corpus", "corpus.jsonl", "--scores", "scores.csv", "--rho", "20", "--out", "pool.jsonl"]);
    let pool_meta = first_line(&p.join("pool.jsonl"));
    assert_eq!(pool_meta["pool_size"], 60);
    ok(p, &["select", "--corpus", "corpus.jsonl", "--method", "mtld", "--pool", "pool.jsonl", "--count", "20", "--out", "a.jsonl"]);
    ok(p, &["select", "--corpus", "corpus.jsonl", "--method", "mtld", "--rho", "20", "--scores", "scores.csv", "--count", "20", "--out", "b.jsonl"]);
    let ids = |f: &str| -> Vec<String> {
        std::fs::read_to_string(p.join(f)).unwrap().lines().skip(1).map(str::to_owned).collect()
    };
    assert_eq!(ids("a.jsonl"), ids("b.jsonl"));
    assert_eq!(ids("a.jsonl").len(), 20);
}

#[test]
fn every_selector_runs() {
    let dir = fixture();
    let p = dir.path();
    std::fs::write(
        p.join("target.jsonl"),
        "{\"text\":\"river stone cloud\",\"lang\":\"l00\"}\n{\"instruction\":\"paper\",\"response\":\"window garden\"}\n",
    )
    .unwrap();
    let mut scores = String::from("id,score\n");
    for i in 0..300 {
        scores.push_str(&format!("s{i:06},{}\n", i % 7));
    }
    std::fs::write(p.join("ext.csv"), scores).unwrap();
    let runs: [&[&str]; 6] = [
        &["--method", "rand", "--seed", "1"],
        &["--method", "kmc", "--seed", "1", "--embeddings", "embeddings.bin"],
        &["--method", "mtld", "--stratified"],
        &["--method", "dsir", "--target", "target.jsonl"],
        &["--method", "dsir", "--target", "target.jsonl", "--dsir-mode", "gumbel", "--seed", "3"],
        &["--method", "external", "--score-file", "ext.csv"],
    ];
    for extra in runs {
        let mut args = vec!["select", "--corpus", "corpus.jsonl", "--fraction", "0.05", "--out", "plan.jsonl"];
        args.extend_from_slice(extra);
        ok(p, &args);
        let meta = first_line(&p.join("plan.jsonl"));
        assert_eq!(meta["selected_count"], 15, "{extra:?}");
        assert_eq!(meta["manifest"]["subcommand"], "select");
    }
}

#[test]
fn stratified_rejected_for_unsupported_selectors() {
    let dir = fixture();
    let out = langgps(
        dir.path(),
        &[
            "select", "--corpus", "corpus.jsonl", "--method", "kmc", "--seed", "1", "--embeddings",
            "embeddings.bin", "--count", "5", "--stratified", "--out", "p",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn curriculum_orders_every_row() {
    let dir = fixture();
    let p = dir.path();
    for order in ["ascending", "descending", "balanced"] {
        ok(p, &[
            "curriculum", "--corpus", "corpus.jsonl", "--scores", "scores.csv", "--order", order,
            "--seed", "4", "--out", "cur.jsonl",
        ]);
        let text = std::fs::read_to_string(p.join("cur.jsonl")).unwrap();
        assert_eq!(text.lines().count(), 301, "{order}");
        let meta = first_line(&p.join("cur.jsonl"));
        assert_eq!(meta["strategy"], order);
    }
    let out = langgps(p, &[
        "curriculum", "--corpus", "corpus.jsonl", "--scores", "scores.csv", "--order", "random",
        "--seed", "4", "--out", "cur.jsonl",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn report_contains_summary_histograms_and_similarity() {
    let dir = fixture();
    let p = dir.path();
    ok(p, &[
        "report", "--corpus", "corpus.jsonl", "--scores", "scores.csv", "--embeddings",
        "embeddings.bin", "--seed", "2", "--max-pairs", "500", "--out", "report.json",
    ]);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["metadata"]["tool_version"], "langgps 0.1.0");
    assert!(report["metadata"]["inputs"]["scores.csv"].is_string());
    assert_eq!(report["summary"]["full"]["overall"]["count"], 300);
    assert_eq!(report["similarity"]["pairs"], 500);
    assert_eq!(report["similarity"]["exhaustive"], false);
    assert!(report["score_histograms_by_language"]["l00"].is_object());
}

#[test]
fn scores_for_other_corpus_are_rejected() {
    let dir = fixture();
    let p = dir.path();
    common::write_corpus(&common::samples(10, 2, 5), &p.join("small.jsonl"));
    let out = langgps(p, &["preselect", "--corpus", "small.jsonl", "--scores", "scores.csv", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
}
