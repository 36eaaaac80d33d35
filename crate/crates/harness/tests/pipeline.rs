mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use common::{client, is_link_request, oracle_handler, Env};
use splitlink::orchestrate::{read_traces, write_traces};
use splitlink::{evaluate, run_pipeline, EvalOptions};
use splitlink_core::evalx::InferenceMode;
use splitlink_core::promptgen::{prompt_table_blocks, PromptTemplateSet};
use splitlink_testkit::{MockReply, MockServer};

#[test]
fn client_round_trip_and_headers() {
    let server = MockServer::start(|r| {
        assert_eq!(r.model, "mock");
        assert_eq!(r.temperature, Some(0.0));
        assert_eq!(r.authorization, None);
        MockReply::Content("SELECT 1".into())
    });
    assert_eq!(
        client(server.base_url(), 0).complete("sys", "user").unwrap(),
        "SELECT 1"
    );
}

#[test]
fn retries_server_errors() {
    let server = MockServer::start(|r| {
        if r.sequence <= 2 {
            MockReply::Status(500)
        } else {
            MockReply::Content("ok".into())
        }
    });
    assert_eq!(client(server.base_url(), 3).complete("s", "u").unwrap(), "ok");
    assert_eq!(server.request_count(), 3);
}

#[test]
fn gives_up_after_retry_budget() {
    let server = MockServer::start(|_| MockReply::Status(503));
    let err = client(server.base_url(), 2).complete("s", "u").unwrap_err();
    assert_eq!(err.attempts, 3);
    assert_eq!(server.request_count(), 3);
    // client errors are final
    let server = MockServer::start(|_| MockReply::Status(400));
    assert_eq!(client(server.base_url(), 2).complete("s", "u").unwrap_err().attempts, 1);
}

#[test]
fn slow_reply_times_out() {
    let server = MockServer::start(|_| {
        MockReply::Delayed(Duration::from_millis(800), Box::new(MockReply::Content("late".into())))
    });
    let mut c = splitlink::EndpointConfig {
        base_url: server.base_url(),
        request_timeout_ms: 100,
        ..Default::default()
    };
    c.retry.max_retries = 0;
    assert!(splitlink::Client::new(c).complete("s", "u").is_err());
}

#[test]
fn bearer_token_from_environment() {
    std::env::set_var("SPLITLINK_TEST_KEY", "sk-test");
    let server = MockServer::start(|r| MockReply::Content(r.authorization.clone().unwrap_or_default()));
    let c = splitlink::Client::new(splitlink::EndpointConfig {
        base_url: server.base_url(),
        api_key_env: "SPLITLINK_TEST_KEY".into(),
        ..Default::default()
    });
    assert_eq!(c.complete("s", "u").unwrap(), "Bearer sk-test");
    assert!(!format!("{c:?}").contains("sk-test"));
}

#[test]
fn oracle_link_reaches_full_accuracy() {
    let env = Env::new(30, 5);
    let server = MockServer::start(oracle_handler(env.answers()));
    let templates = PromptTemplateSet::default();
    let (traces, summary) = run_pipeline(
        InferenceMode::OracleLink,
        &env.split,
        &env.catalogs,
        &templates,
        &client(server.base_url(), 0),
        false,
    );
    assert_eq!(summary.failed, 0);
    assert_eq!(traces.len(), 30);
    assert!(traces.iter().all(|t| t.stage1_prompt.is_none()));
    let report = evaluate(&traces, &env.split, &env.catalogs, &EvalOptions::default()).unwrap();
    assert_eq!((report.ex_accuracy, report.em_accuracy), (1.0, 1.0));
}

#[test]
fn perfect_linker_collapses_modes() {
    let env = Env::new(40, 6);
    let server = MockServer::start(oracle_handler(env.answers()));
    let c = client(server.base_url(), 0);
    let t = PromptTemplateSet::default();
    let (dts, _) = run_pipeline(InferenceMode::Dts, &env.split, &env.catalogs, &t, &c, false);
    let (oracle, _) = run_pipeline(InferenceMode::OracleLink, &env.split, &env.catalogs, &t, &c, false);
    for (d, o) in dts.iter().zip(&oracle) {
        assert!(d.stage1_prompt.is_some() && d.stage1_completion.is_some());
        assert_eq!(d.stage2_prompt, o.stage2_prompt, "{}", d.example_id);
        assert_eq!(d.resolved_link, o.resolved_link);
    }
    let opts = EvalOptions {
        link_metrics: true,
        ..Default::default()
    };
    let report = evaluate(&dts, &env.split, &env.catalogs, &opts).unwrap();
    let link = report.linking.unwrap();
    assert_eq!((link.precision, link.recall, link.exact_match), (1.0, 1.0, 1.0));
}

#[test]
fn full_mode_shows_every_table() {
    let env = Env::new(9, 7);
    let server = MockServer::start(oracle_handler(env.answers()));
    let (traces, _) = run_pipeline(
        InferenceMode::Full,
        &env.split,
        &env.catalogs,
        &PromptTemplateSet::default(),
        &client(server.base_url(), 0),
        false,
    );
    for t in &traces {
        let expected = env.catalogs[&t.db_id].tables.len();
        assert_eq!(prompt_table_blocks(t.stage2_prompt.as_deref().unwrap()).len(), expected);
        assert!(t.stage1_prompt.is_none());
    }
    assert!(traces
        .iter()
        .any(|t| t.db_id == "store_1" && t.resolved_link.tables.len() == 5));
}

#[test]
fn garbage_link_falls_back_to_all_tables() {
    let env = Env::new(6, 8);
    let answers = env.answers();
    let server = MockServer::start(move |r| {
        if is_link_request(r) {
            MockReply::Content("I am not sure.".into())
        } else {
            MockReply::Content(answers[r.question().unwrap()].0.clone())
        }
    });
    let t = PromptTemplateSet::default();
    let c = client(server.base_url(), 0);
    let (dts, summary) = run_pipeline(InferenceMode::Dts, &env.split, &env.catalogs, &t, &c, false);
    let (full, _) = run_pipeline(InferenceMode::Full, &env.split, &env.catalogs, &t, &c, false);
    assert_eq!(summary.fallbacks, 6);
    for (d, f) in dts.iter().zip(&full) {
        assert!(d.link_fallback);
        assert!(!d.link_warnings.is_empty());
        assert_eq!(d.stage2_prompt, f.stage2_prompt);
    }
}

#[test]
fn stage_one_failure_skips_stage_two() {
    let env = Env::new(4, 9);
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    let server = MockServer::start(move |r| {
        seen.fetch_add(1, Ordering::SeqCst);
        if is_link_request(r) {
            MockReply::Status(500)
        } else {
            MockReply::Content("SELECT 1".into())
        }
    });
    let (traces, summary) = run_pipeline(
        InferenceMode::Dts,
        &env.split,
        &env.catalogs,
        &PromptTemplateSet::default(),
        &client(server.base_url(), 1),
        false,
    );
    assert_eq!(summary.failed, 4);
    assert_eq!(calls.load(Ordering::SeqCst), 8);
    for t in &traces {
        assert!(t.stage2_prompt.is_none());
        assert_eq!(t.extracted_sql, "");
        assert_eq!(t.stage1_completion.as_deref(), Some(""));
    }
    let report = evaluate(&traces, &env.split, &env.catalogs, &EvalOptions::default()).unwrap();
    assert_eq!(report.ex_accuracy, 0.0);
    assert_eq!(report.n, 4);
}

#[test]
fn traces_round_trip_and_rerun_identically() {
    let env = Env::new(20, 10);
    let server = MockServer::start(oracle_handler(env.answers()));
    let c = client(server.base_url(), 0);
    let t = PromptTemplateSet::default();
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for i in 0..2 {
        let (traces, _) = run_pipeline(InferenceMode::Dts, &env.split, &env.catalogs, &t, &c, false);
        let p = dir.path().join(format!("t{i}.jsonl"));
        write_traces(&p, &traces).unwrap();
        assert_eq!(read_traces(&p).unwrap(), traces);
        bytes.push(std::fs::read(&p).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    let ids: Vec<String> = read_traces(&dir.path().join("t0.jsonl"))
        .unwrap()
        .into_iter()
        .map(|t| t.example_id)
        .collect();
    let expected: Vec<String> = (0..20).map(|i| format!("dev:{i}")).collect();
    assert_eq!(ids, expected);
}
