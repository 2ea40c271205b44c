mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{dead_url, fixture_config};
use serde_json::Value;

fn subjex(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subjex"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("SUBJEX_LLM_ENDPOINT")
        .env_remove("SUBJEX_RANK_ENDPOINT")
        .env_remove("SUBJEX_EMBED_ENDPOINT")
        .output()
        .expect("binary runs")
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_dir_of(v: &Value) -> PathBuf {
    PathBuf::from(v["run_dir"].as_str().expect("run_dir reported"))
}

#[test]
fn run_is_cached_and_reproducible_across_processes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_a = fixture_config(tmp.path(), &tmp.path().join("runs-a"));
    let first = ok_json(&subjex(&cfg_a, &["run"]));
    assert!(first["llm_requests"].as_u64().unwrap() > 0);
    let dir = run_dir_of(&first);
    for name in ["docs.jsonl", "mapped.jsonl", "summarised.jsonl", "ranked.jsonl", "final.jsonl", "report.json"] {
        assert!(dir.join(name).exists(), "{name} missing");
    }
    assert!(dir.join("complete").is_dir());
    assert!(!dir.join(".lock").exists());
    let final_a = std::fs::read(dir.join("final.jsonl")).unwrap();
    assert!(!final_a.is_empty());

    let again = ok_json(&subjex(&cfg_a, &["run"]));
    assert_eq!(again["llm_requests"], 0);
    assert_eq!(std::fs::read(dir.join("final.jsonl")).unwrap(), final_a);

    // same configuration, fresh directory, new process
    let other = tempfile::tempdir().unwrap();
    let cfg_b = fixture_config(other.path(), &other.path().join("runs-b"));
    let second = ok_json(&subjex(&cfg_b, &["run"]));
    let dir_b = run_dir_of(&second);
    assert_eq!(dir.file_name(), dir_b.file_name(), "config hash differs");
    assert_eq!(std::fs::read(dir_b.join("final.jsonl")).unwrap(), final_a);
    assert_eq!(first["summary"], second["summary"]);
}

#[test]
fn stages_run_one_by_one_and_match_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture_config(tmp.path(), &tmp.path().join("runs"));
    for stage in ["ingest", "build-index", "complete", "map", "summarise", "rank", "combine"] {
        ok_json(&subjex(&cfg, &[stage]));
    }
    let eval = ok_json(&subjex(&cfg, &["evaluate", "--group-by", "language"]));
    let summary = &eval["summary"];
    assert!(summary["pr_auc"].as_f64().unwrap() > 0.0, "{summary}");
    assert!(summary["groups"].as_object().unwrap().contains_key("de"), "{summary}");

    let other = tempfile::tempdir().unwrap();
    let cfg_b = fixture_config(other.path(), &other.path().join("runs"));
    let run = ok_json(&subjex(&cfg_b, &["run"]));
    let dir = run_dir_of(&eval);
    assert_eq!(
        std::fs::read(dir.join("final.jsonl")).unwrap(),
        std::fs::read(run_dir_of(&run).join("final.jsonl")).unwrap()
    );
}

#[test]
fn combine_before_rank_names_the_missing_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture_config(tmp.path(), &tmp.path().join("runs"));
    let out = subjex(&cfg, &["combine"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("\"rank\""), "{}", stderr(&out));
}

#[test]
fn invalid_alpha_is_a_validation_error_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture_config(tmp.path(), &tmp.path().join("runs"));
    let out = subjex(&cfg, &["--alpha", "1.5", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("combine.alpha"), "{}", stderr(&out));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn token_bounds_are_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, "[[models]]\nmodel_id = \"m\"\nmin_tokens = 200\nmax_tokens = 100\n").unwrap();
    let out = subjex(&path, &["run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("models[0]"), "{}", stderr(&out));
}

#[test]
fn sweep_and_optimize_use_cached_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture_config(tmp.path(), &tmp.path().join("runs"));
    let missing = subjex(&cfg, &["sweep-alpha"]);
    assert_eq!(missing.status.code(), Some(2));
    ok_json(&subjex(&cfg, &["run"]));

    let sweep = ok_json(&subjex(&cfg, &["sweep-alpha"]));
    assert_eq!(sweep["llm_requests"], 0);
    let points = sweep["summary"]["sweep"].as_array().unwrap();
    assert_eq!(points.len(), 11);

    let opt = ok_json(&subjex(&cfg, &["optimize"]));
    assert_eq!(opt["llm_requests"], 0);
    let chosen = opt["summary"]["chosen"]["member_ids"].as_array().unwrap();
    assert!(!chosen.is_empty() && chosen.len() <= 20);
}

#[test]
fn unreachable_backend_exits_with_backend_status() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::fixtures();
    let path = tmp.path().join("dead.toml");
    let text = format!(
        r#"run_dir = {runs:?}
[corpus]
docs = {docs:?}
train = {train:?}
[vocabulary]
path = {vocab:?}
[[models]]
model_id = "remote"
endpoint = {url:?}
max_retries = 0
[[members]]
model = "remote"
prompt = "p01"
"#,
        runs = tmp.path().join("runs").display().to_string(),
        docs = fx.join("docs.jsonl").display().to_string(),
        train = fx.join("train.jsonl").display().to_string(),
        vocab = fx.join("vocab.tsv").display().to_string(),
        url = dead_url(),
    );
    std::fs::write(&path, text).unwrap();
    let out = subjex(&path, &["run"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn vocab_stats_reports_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture_config(tmp.path(), &tmp.path().join("runs"));
    let v = ok_json(&subjex(&cfg, &["vocab-stats"]));
    assert_eq!(v["summary"]["concepts"], 132, "{v}");
    assert_eq!(v["summary"]["target"], 120, "{v}");
}
