use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(rel)
}

fn specrag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specrag")).args(args).output().expect("spawn specrag")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn built() -> &'static (TempDir, String) {
    static DB: OnceLock<(TempDir, String)> = OnceLock::new();
    DB.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let db = dir.path().join("db").to_string_lossy().into_owned();
        let corpus = fixture("corpus");
        let tdocs = fixture("tdocs");
        let o = specrag(&["build", "--corpus", corpus.to_str().unwrap(), "--tdocs", tdocs.to_str().unwrap(), "--out", &db]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("247 clause chunks, 99 change entries"), "{}", stdout(&o));
        (dir, db)
    })
}

#[test]
fn query_json_is_stable_across_processes() {
    let db = &built().1;
    let q = "How is the PUCCH repetition factor determined for HARQ-ACK?";
    let a = specrag(&["query", "--db", db, "--question", q, "--json"]);
    let b = specrag(&["query", "--db", db, "--question", q, "--json"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let chunks = v["context_chunks"].as_array().unwrap();
    let first = chunks[0]["chunk_uid"].as_str().unwrap();
    assert!(v["answer"].as_str().unwrap().starts_with(first));
    assert!(v["prompt"].as_str().unwrap().contains(q));
}

#[test]
fn query_with_unreachable_generator_exits_two() {
    let (dir, db) = built();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = dir.path().join("unreachable.toml");
    std::fs::write(
        &cfg,
        format!(
            "[providers.generate]\nkind = \"remote-generate\"\nendpoint = \"http://127.0.0.1:{port}\"\nmodel_name = \"m\"\ntimeout_ms = 500\nretry_count = 0\n"
        ),
    )
    .unwrap();
    let o = specrag(&["--config", cfg.to_str().unwrap(), "query", "--db", db, "--question", "PUCCH repetition", "--json"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["failures"][0]["stage"], "generate");
    assert!(!v["context_chunks"].as_array().unwrap().is_empty());
}

#[test]
fn diff_prints_history() {
    let db = &built().1;
    let o = specrag(&["diff", "--db", db, "--spec", "38214", "--clause", "5.1.2.3", "--json"]);
    assert!(o.status.success());
    let chain: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let kinds: Vec<&str> = chain.as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds.first(), Some(&"initial_addition"));
    assert_eq!(kinds.last(), Some(&"removal"));

    let o = specrag(&["diff", "--db", db, "--spec", "38.214", "--clause", "99.9"]);
    assert!(!o.status.success());
}

#[test]
fn trace_from_uid_and_missing_uid() {
    let db = &built().1;
    let o = specrag(&["trace", "--db", db, "--question", "PUCCH resource sets", "--json"]);
    assert!(o.status.success());
    let trace: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let nodes = trace["nodes"].as_array().unwrap();
    assert!(nodes.iter().any(|n| n["depth"] == 0));

    let uid = nodes[0]["chunk_uid"].as_str().unwrap();
    let o = specrag(&["trace", "--db", db, "--uid", uid, "--depth", "0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next().unwrap().split_whitespace().next(), Some(uid));

    assert!(!specrag(&["trace", "--db", db, "--uid", "nope"]).status.success());
}

#[test]
fn eval_writes_report() {
    let dir = TempDir::new().unwrap();
    let db = dir.path().join("db");
    let corpus = fixture("planted/corpus");
    let o = specrag(&["build", "--corpus", corpus.to_str().unwrap(), "--out", db.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("report.json");
    let gold = fixture("planted/gold.csv");
    let o = specrag(&[
        "eval", "--db", db.to_str().unwrap(), "--gold", gold.to_str().unwrap(),
        "--k2", "1000", "--depth", "2", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["macro_recall"], 1.0);
    assert_eq!(report["per_source"].as_array().unwrap().len(), 4);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing");
    let o = specrag(&["query", "--db", missing.to_str().unwrap(), "--question", "x"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[retrieval]\nk9 = 1\n").unwrap();
    let o = specrag(&["--config", cfg.to_str().unwrap(), "query", "--db", &built().1, "--question", "x"]);
    assert_eq!(o.status.code(), Some(1));
}
