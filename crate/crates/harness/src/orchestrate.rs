//! Inference over a split in one of three modes, with a full trace per
//! example.
//!
//! * `full`: one generation call showing every table.
//! * `dts`: a linking call, then a generation call showing only the linked
//!   tables. An empty link falls back to every table.
//! * `oracle_link`: one generation call showing the gold tables.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use splitlink_core::evalx::{Excluded, InferenceMode};
use splitlink_core::linker::parse_linker_output;
use splitlink_core::promptgen::{build_prompt, PromptTemplateSet, Stage};
use splitlink_core::{DatabaseCatalog, LinkTarget};

use crate::catalog_io::Catalogs;
use crate::client::Client;
use crate::ingest::{Example, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageTrace {
    pub example_id: String,
    pub db_id: String,
    pub mode: InferenceMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1_completion: Option<String>,
    /// Parsed linker output (dts only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_link: Option<LinkTarget>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub link_warnings: Vec<String>,
    /// The linker named no known table, so every table was shown.
    #[serde(default)]
    pub link_fallback: bool,
    /// Tables the generation prompt was built from.
    pub resolved_link: LinkTarget,
    /// Absent when stage 1 failed and stage 2 was skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2_prompt: Option<String>,
    pub stage2_completion: String,
    pub extracted_sql: String,
    /// Endpoint failure, if any. Failed examples carry empty SQL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<BTreeMap<String, u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n: usize,
    pub failed: usize,
    pub fallbacks: usize,
    pub quarantined: Vec<Excluded>,
}

/// Pulls the SQL statement out of a model reply: the first fenced block if
/// there is one, a leading `SQL:` label dropped, cut at the first semicolon
/// outside quotes.
pub fn extract_sql(completion: &str) -> String {
    let mut text = completion;
    if let Some(start) = text.find("```") {
        let body = &text[start + 3..];
        // Skip an info string such as `sql`.
        let body = match body.find('\n') {
            Some(nl) if !body[..nl].trim().contains(' ') => &body[nl + 1..],
            _ => body,
        };
        text = body.find("```").map_or(body, |end| &body[..end]);
    }
    let mut text = text.trim();
    if text.len() >= 4 && text[..4].eq_ignore_ascii_case("sql:") {
        text = text[4..].trim_start();
    }
    let mut quote = None;
    for (i, c) in text.char_indices() {
        match (quote, c) {
            (None, '\'' | '"' | '`') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, ';') => return text[..i].trim().to_string(),
            _ => {}
        }
    }
    text.trim().to_string()
}

struct Prepared<'a> {
    example: &'a Example,
    catalog: &'a DatabaseCatalog,
    gold: LinkTarget,
}

fn ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn run_example(
    mode: InferenceMode,
    p: &Prepared<'_>,
    templates: &PromptTemplateSet,
    client: &Client,
    timings: bool,
) -> TwoStageTrace {
    let (ex, catalog) = (p.example, p.catalog);
    let mut wall = BTreeMap::new();
    let mut trace = TwoStageTrace {
        example_id: ex.example_id.clone(),
        db_id: ex.db_id.clone(),
        mode,
        stage1_prompt: None,
        stage1_completion: None,
        predicted_link: None,
        link_warnings: Vec::new(),
        link_fallback: false,
        resolved_link: LinkTarget::all_tables(catalog),
        stage2_prompt: None,
        stage2_completion: String::new(),
        extracted_sql: String::new(),
        failure: None,
        wall_ms: None,
    };
    let stage2_prompt = match mode {
        InferenceMode::Full => build_prompt(Stage::Full, &ex.question, catalog, None, templates),
        InferenceMode::OracleLink => {
            trace.resolved_link = p.gold.clone();
            build_prompt(Stage::Gen, &ex.question, catalog, Some(&p.gold.tables), templates)
        }
        InferenceMode::Dts => {
            let prompt = build_prompt(Stage::Link, &ex.question, catalog, None, templates)
                .expect("link prompts need no selection");
            let start = Instant::now();
            let reply = client.complete(templates.system(Stage::Link), &prompt);
            wall.insert("stage1".to_string(), ms(start));
            trace.stage1_prompt = Some(prompt);
            match reply {
                Ok(text) => {
                    let parsed = parse_linker_output(&text, catalog);
                    trace.stage1_completion = Some(text);
                    trace.link_warnings = parsed.warnings;
                    if parsed.target.tables.is_empty() {
                        trace.link_fallback = true;
                    } else {
                        trace.resolved_link = parsed.target.clone();
                    }
                    trace.predicted_link = Some(parsed.target);
                }
                Err(e) => {
                    trace.stage1_completion = Some(String::new());
                    trace.failure = Some(format!("stage 1: {e}"));
                }
            }
            build_prompt(
                Stage::Gen,
                &ex.question,
                catalog,
                Some(&trace.resolved_link.tables),
                templates,
            )
        }
    };
    if trace.failure.is_none() {
        let prompt = stage2_prompt.expect("selection is nonempty and drawn from the catalog");
        let start = Instant::now();
        match client.complete(templates.system(Stage::Gen), &prompt) {
            Ok(text) => {
                trace.extracted_sql = extract_sql(&text);
                trace.stage2_completion = text;
            }
            Err(e) => trace.failure = Some(format!("stage 2: {e}")),
        }
        wall.insert("stage2".to_string(), ms(start));
        trace.stage2_prompt = Some(prompt);
    }
    if timings {
        trace.wall_ms = Some(wall);
    }
    trace
}

/// Runs every non-quarantined example with at most `max_parallel_requests`
/// examples in flight. Traces come back in split order.
pub fn run_pipeline(
    mode: InferenceMode,
    split: &Split,
    catalogs: &Catalogs,
    templates: &PromptTemplateSet,
    client: &Client,
    timings: bool,
) -> (Vec<TwoStageTrace>, RunSummary) {
    let mut prepared = Vec::new();
    let mut quarantined = Vec::new();
    for ex in &split.examples {
        let catalog = &catalogs[&ex.db_id];
        match ex.gold_link(catalog) {
            Ok(gold) => prepared.push(Prepared {
                example: ex,
                catalog,
                gold,
            }),
            Err(reason) => quarantined.push(Excluded {
                example_id: ex.example_id.clone(),
                reason,
            }),
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(client.config().max_parallel_requests.max(1))
        .build()
        .expect("thread pool");
    let traces: Vec<TwoStageTrace> = pool.install(|| {
        prepared
            .par_iter()
            .map(|p| run_example(mode, p, templates, client, timings))
            .collect()
    });
    let summary = RunSummary {
        n: traces.len(),
        failed: traces.iter().filter(|t| t.failure.is_some()).count(),
        fallbacks: traces.iter().filter(|t| t.link_fallback).count(),
        quarantined,
    };
    (traces, summary)
}

pub fn write_traces(path: &Path, traces: &[TwoStageTrace]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in traces {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[derive(Debug, thiserror::Error)]
pub enum TraceReadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub fn read_traces(path: &Path) -> Result<Vec<TwoStageTrace>, TraceReadError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| TraceReadError::Json { line: i + 1, source })?);
    }
    Ok(out)
}
