use std::path::Path;
use std::process::{Command, Output};

use biaslens::demo::demo_dir;
use serde_json::Value;
use tempfile::TempDir;

fn run(project: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biaslens"))
        .arg("--project")
        .arg(project)
        .arg("--json")
        .args(args)
        .env_remove("BIASLENS_LLM_URL")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ingested() -> (TempDir, std::path::PathBuf) {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("proj");
    let d = demo_dir();
    assert!(run(&p, &["init", "--name", "t", "--set", "clustering.min_cluster_size=5"]).status.success());
    let out = run(
        &p,
        &[
            "ingest",
            "--articles",
            path(&d.join("articles.jsonl")),
            "--newspapers",
            path(&d.join("newspapers.json")),
            "--embeddings",
            path(&d.join("embeddings.jsonl")),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (tmp, p)
}

#[test]
fn metrics_before_topics_exits_two_with_a_plan() {
    let (_tmp, p) = ingested();
    let out = run(&p, &["metrics"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["ok"], false);
    assert_eq!(v["exit_code"], 2);
    let plan = v["rebuild"].as_str().unwrap();
    assert!(plan.starts_with("biaslens clean"), "{plan}");
    assert!(plan.ends_with("biaslens metrics"), "{plan}");
}

#[test]
fn validation_failures_exit_one() {
    let (_tmp, p) = ingested();
    assert_eq!(run(&p, &["config", "set", "clustering.min_cluster_size", "zero"]).status.code(), Some(1));
    assert_eq!(run(&p, &["config", "set", "nope.key", "1"]).status.code(), Some(1));
    assert_eq!(run(&p, &["init", "--name", "again"]).status.code(), Some(1));
    assert_eq!(run(&p, &["score-load"]).status.code(), Some(1));
}

#[test]
fn unset_llm_endpoint_exits_three() {
    let (_tmp, p) = ingested();
    assert!(run(&p, &["clean"]).status.success());
    let out = run(&p, &["ontology-extract"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(json(&out)["error"].as_str().unwrap().contains("BIASLENS_LLM_URL"));
}

#[test]
fn full_run_and_recorded_commands_replay() {
    let (_tmp, p) = ingested();
    let d = demo_dir();
    let steps: Vec<Vec<String>> = vec![
        vec!["clean".into(), "--noise-rules".into(), path(&d.join("noise_rules.json")).into()],
        vec!["cluster".into()],
        vec!["topics".into()],
        vec!["score-load".into(), "--baseline".into()],
        vec!["entities-load".into(), "--mentions".into(), path(&d.join("entities.jsonl")).into()],
        vec!["contexts-export".into()],
        vec!["entities-load".into(), "--baseline-sentiment".into()],
        vec!["ontology-extract".into(), "--canned".into(), path(&d.join("ontology_replies.json")).into()],
        vec!["ontology-audit".into(), "--aliases".into(), path(&d.join("aliases.json")).into()],
        vec!["metrics".into()],
    ];
    for s in &steps {
        let args: Vec<&str> = s.iter().map(String::as_str).collect();
        let out = run(&p, &args);
        assert!(out.status.success(), "{s:?}: {}", String::from_utf8_lossy(&out.stdout));
    }
    let status = json(&run(&p, &["status"]));
    for (name, st) in status["summary"]["stages"].as_object().unwrap() {
        assert_eq!(st["state"]["status"], "fresh", "{name}");
    }

    let spectrum = json(&run(&p, &["spectrum", "--topic", "0", "--mode", "body"]));
    assert!(spectrum["summary"]["points"].as_array().unwrap().len() >= 2);
    let map = json(&run(&p, &["map", "--topic", "0"]));
    assert_eq!(map["summary"].as_array().unwrap().len(), 2);

    // A changed key plus the recorded rebuild plan restores freshness.
    assert!(run(&p, &["config", "set", "topics.name_terms", "3"]).status.success());
    let err = json(&run(&p, &["metrics"]));
    let plan = err["rebuild"].as_str().unwrap().to_string();
    for cmd in plan.split(" && ") {
        let words: Vec<&str> = cmd.split_whitespace().skip(1).collect();
        let out = run(&p, &words);
        assert!(out.status.success(), "{cmd}");
    }
    let audit = json(&run(&p, &["ontology-audit"]));
    assert_eq!(audit["ok"], true);

    let out_dir = p.join("export");
    let out = run(&p, &["export", "--out", path(&out_dir), "--topic", "0", "--newspaper", "globe"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    for f in ["topics.json", "metrics.json", "ontology.gexf", "ontology_0.gexf", "ontology_0_edges.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}
