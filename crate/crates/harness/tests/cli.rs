mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{oracle_handler, Env};
use serde_json::Value as Json;
use splitlink_testkit::{MockReply, MockServer};

fn splitlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitlink"))
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("run splitlink")
}

fn inputs<'a>(env: &'a Env, out: &'a str) -> Vec<String> {
    vec![
        "--tables".into(),
        env.ws.tables_json().display().to_string(),
        "--examples".into(),
        env.examples.display().to_string(),
        "--db-root".into(),
        env.ws.db_root().display().to_string(),
        "--out".into(),
        out.into(),
    ]
}

fn run(sub: &str, env: &Env, out: &Path, extra: &[&str]) -> Output {
    let out = out.display().to_string();
    let mut args: Vec<String> = vec![sub.into()];
    args.extend(inputs(env, &out));
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    splitlink(&refs)
}

fn json(path: &Path) -> Json {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_usage_errors() {
    for sub in ["prepare", "infer", "eval", "report"] {
        let o = splitlink(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&o.stdout).contains("--"));
    }
    assert_eq!(splitlink(&["prepare", "--nope"]).status.code(), Some(1));
    assert_eq!(splitlink(&["infer", "--mode", "sideways"]).status.code(), Some(1));
}

#[test]
fn prepare_is_deterministic() {
    let env = Env::new(24, 21);
    let dir = tempfile::tempdir().unwrap();
    for stage in ["full", "link", "gen"] {
        let (a, b) = (
            dir.path().join(format!("{stage}-a")),
            dir.path().join(format!("{stage}-b")),
        );
        for out in [&a, &b] {
            let o = run("prepare", &env, out, &["--stage", stage]);
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        }
        let file = format!("{stage}.jsonl");
        assert_eq!(
            std::fs::read(a.join(&file)).unwrap(),
            std::fs::read(b.join(&file)).unwrap()
        );
        let manifest = json(&a.join(format!("{stage}.manifest.json")));
        assert_eq!(manifest["count"], 24);
        assert_eq!(manifest, json(&b.join(format!("{stage}.manifest.json"))));
        let lines = std::fs::read_to_string(a.join(&file)).unwrap().lines().count();
        assert_eq!(lines, 24);
    }
}

#[test]
fn prepare_quarantines_unsupported_gold() {
    let env = Env::new(3, 22);
    let mut rows = env.rows.clone();
    rows.push((
        "pets_1".into(),
        "Which pets?".into(),
        "SELECT * FROM pets WINDOW w AS ()".into(),
    ));
    splitlink_testkit::write_examples(&env.examples, &rows).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let o = run("prepare", &env, dir.path(), &["--stage", "link"]);
    assert_eq!(o.status.code(), Some(0));
    let manifest = json(&dir.path().join("link.manifest.json"));
    assert_eq!(manifest["count"], 3);
    assert_eq!(manifest["quarantined"], serde_json::json!(["dev:3"]));
    let report = json(&dir.path().join("link.quarantine.json"));
    assert_eq!(report[0]["example_id"], "dev:3");
}

#[test]
fn unknown_database_is_an_infrastructure_error() {
    let env = Env::new(2, 23);
    let mut rows = env.rows.clone();
    rows.push(("no_such_db".into(), "q".into(), "SELECT 1".into()));
    splitlink_testkit::write_examples(&env.examples, &rows).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let o = run("prepare", &env, dir.path(), &["--stage", "full"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_db"));
}

#[test]
fn infer_eval_report() {
    let env = Env::new(15, 24);
    let server = MockServer::start(oracle_handler(env.answers()));
    let dir = tempfile::tempdir().unwrap();
    let url = server.base_url();
    let endpoint = ["--base-url", url.as_str(), "--model", "mock", "--backoff-ms", "1"];
    let mut reports = Vec::new();
    for mode in ["oracle-link", "dts", "full"] {
        let out = dir.path().join(mode);
        let mut extra = vec!["--mode", mode];
        extra.extend(endpoint);
        let o = run("infer", &env, &out, &extra);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let traces = std::fs::read_to_string(out.join("traces.jsonl")).unwrap();
        let traces: Vec<Json> = traces.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(traces.len(), 15);
        assert_eq!(traces.iter().all(|t| t.get("stage1_prompt").is_some()), mode == "dts");

        let traces_path = out.join("traces.jsonl").display().to_string();
        let o = run(
            "eval",
            &env,
            &out,
            &[
                "--traces",
                &traces_path,
                "--metrics",
                "ex,em,link",
                "--model-label",
                "mock",
            ],
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let report = json(&out.join("report.json"));
        assert_eq!(report["ex_accuracy"], 1.0);
        assert_eq!(report["em_accuracy"], 1.0);
        assert_eq!(
            std::fs::read_to_string(out.join("verdicts.jsonl"))
                .unwrap()
                .lines()
                .count(),
            15
        );
        assert!(std::fs::read_to_string(out.join("report.txt"))
            .unwrap()
            .starts_with("Model"));
        reports.push(out.join("report.json").display().to_string());
    }
    let mut args = vec!["report", "--reports"];
    args.extend(reports.iter().map(String::as_str));
    let o = splitlink(&args);
    assert_eq!(o.status.code(), Some(0));
    let table = String::from_utf8_lossy(&o.stdout).to_string();
    assert_eq!(table.lines().count(), 4);
    assert!(table.contains("Upper bound") && table.contains("Two-stage") && table.contains("Full tables"));
}

#[test]
fn endpoint_down_still_completes() {
    let env = Env::new(6, 25);
    let server = MockServer::start(|_| MockReply::Status(503));
    let dir = tempfile::tempdir().unwrap();
    let url = server.base_url();
    let o = run(
        "infer",
        &env,
        dir.path(),
        &[
            "--mode",
            "dts",
            "--base-url",
            &url,
            "--model",
            "m",
            "--max-retries",
            "1",
            "--backoff-ms",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let summary = json(&dir.path().join("run_summary.json"));
    assert_eq!(summary["failed"], 6);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("traces.jsonl"))
            .unwrap()
            .lines()
            .count(),
        6
    );
}

#[test]
fn invalid_endpoint_settings_are_usage_errors() {
    let env = Env::new(2, 26);
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        "infer",
        &env,
        dir.path(),
        &[
            "--mode",
            "full",
            "--base-url",
            "http://127.0.0.1:9/v1",
            "--model",
            "m",
            "--max-parallel",
            "0",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
}
