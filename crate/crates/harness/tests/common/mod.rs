//! Shared setup: a fixture workspace with a generated split, and mock
//! handlers that answer from the gold data.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use splitlink::catalog_io::{attach_samples, load_catalogs, Catalogs};
use splitlink::ingest::{load_split, Split};
use splitlink::{Client, EndpointConfig, RetryPolicy};
use splitlink_core::promptgen::DEFAULT_LINKING_SYSTEM;
use splitlink_testkit::{generated_split, write_examples, ChatRequest, FixtureWorkspace, MockReply};

pub struct Env {
    pub ws: FixtureWorkspace,
    pub examples: PathBuf,
    pub catalogs: Catalogs,
    pub split: Split,
    pub rows: Vec<(String, String, String)>,
}

impl Env {
    pub fn new(n: usize, seed: u64) -> Self {
        let ws = FixtureWorkspace::create().expect("fixture workspace");
        let rows = generated_split(&ws.dbs, n, seed);
        let examples = ws.root().join("dev.json");
        write_examples(&examples, &rows).expect("examples file");
        let mut catalogs = load_catalogs(&ws.tables_json()).expect("tables.json");
        for (id, c) in catalogs.iter_mut() {
            let warnings = attach_samples(c, &ws.db_file(id), 3).expect("samples");
            assert!(warnings.is_empty(), "{warnings:?}");
        }
        let split = load_split(&examples, "dev", &catalogs, &ws.db_root()).expect("split");
        Self {
            ws,
            examples,
            catalogs,
            split,
            rows,
        }
    }

    /// question -> (gold SQL, serialized gold link)
    pub fn answers(&self) -> Arc<HashMap<String, (String, String)>> {
        let map = self
            .split
            .examples
            .iter()
            .map(|e| {
                let cat = &self.catalogs[&e.db_id];
                let link = e.gold_link(cat).expect("generated gold parses");
                (e.question.clone(), (e.gold_sql.clone(), link.serialize(cat)))
            })
            .collect();
        Arc::new(map)
    }
}

pub fn is_link_request(r: &ChatRequest) -> bool {
    r.system == DEFAULT_LINKING_SYSTEM.trim()
}

/// A perfect model: gold links for linking prompts, gold SQL (fenced, to
/// exercise extraction) for generation prompts.
pub fn oracle_handler(answers: Arc<HashMap<String, (String, String)>>) -> impl Fn(&ChatRequest) -> MockReply {
    move |r| match r.question().and_then(|q| answers.get(q)) {
        Some((_, link)) if is_link_request(r) => MockReply::Content(link.clone()),
        Some((sql, _)) => MockReply::Content(format!("```sql\n{sql};\n```")),
        None => MockReply::Status(404),
    }
}

pub fn client(base_url: String, max_retries: u32) -> Client {
    Client::new(EndpointConfig {
        base_url,
        model: "mock".into(),
        request_timeout_ms: 5_000,
        max_parallel_requests: 8,
        retry: RetryPolicy {
            max_retries,
            backoff_ms: 1,
        },
        api_key_env: "SPLITLINK_TEST_NO_KEY".into(),
        ..Default::default()
    })
}
