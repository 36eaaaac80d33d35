//! Scoring traces against gold: per-example verdicts and the aggregate
//! report.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use splitlink_core::evalx::{aggregate, diagnose, exact_set_match, EvalReport, Excluded, InferenceMode, SqlVerdict};
use splitlink_core::linker::score_linking;
use splitlink_core::LinkTarget;

use crate::catalog_io::Catalogs;
use crate::exec::{execution_accuracy, DbUnavailable, ExecOutcome};
use crate::ingest::Split;
use crate::orchestrate::TwoStageTrace;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Also score the schema links recorded in the traces.
    pub link_metrics: bool,
    pub ignore_values: bool,
    pub timeout_ms: u64,
    pub timings: bool,
    pub model: Option<String>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            link_metrics: false,
            ignore_values: false,
            timeout_ms: crate::exec::DEFAULT_TIMEOUT_MS,
            timings: false,
            model: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("trace for `{0}` does not belong to the split")]
    UnknownExample(String),
    #[error("traces mix modes {0} and {1}")]
    MixedModes(&'static str, &'static str),
    #[error("no traces to evaluate")]
    NoTraces,
    #[error(transparent)]
    Database(#[from] DbUnavailable),
    #[error(transparent)]
    Empty(#[from] splitlink_core::evalx::EmptyEvaluation),
}

enum Scored {
    Verdict(SqlVerdict),
    Excluded(Excluded),
}

fn excluded(id: &str, reason: impl Into<String>) -> Scored {
    Scored::Excluded(Excluded {
        example_id: id.into(),
        reason: reason.into(),
    })
}

/// The link a trace committed to. A dts run whose linking call failed
/// predicted nothing.
fn predicted_link(t: &TwoStageTrace) -> LinkTarget {
    match (&t.predicted_link, t.mode) {
        (Some(p), _) => p.clone(),
        (None, InferenceMode::Dts) => LinkTarget::default(),
        (None, _) => t.resolved_link.clone(),
    }
}

/// Scores every trace. Examples that cannot be executed (missing database
/// file, failing gold query), quarantined examples and examples without a
/// trace are listed as excluded rather than scored.
pub fn evaluate(
    traces: &[TwoStageTrace],
    split: &Split,
    catalogs: &Catalogs,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let mode = traces.first().ok_or(EvalError::NoTraces)?.mode;
    if let Some(t) = traces.iter().find(|t| t.mode != mode) {
        return Err(EvalError::MixedModes(mode.as_str(), t.mode.as_str()));
    }
    let by_id: HashMap<&str, usize> = split
        .examples
        .iter()
        .enumerate()
        .map(|(i, e)| (e.example_id.as_str(), i))
        .collect();
    let mut traced = BTreeSet::new();
    for t in traces {
        let i = *by_id
            .get(t.example_id.as_str())
            .ok_or_else(|| EvalError::UnknownExample(t.example_id.clone()))?;
        traced.insert(i);
    }

    let scored: Vec<Result<Scored, DbUnavailable>> = traces
        .par_iter()
        .map(|t| {
            let ex = &split.examples[by_id[t.example_id.as_str()]];
            let catalog = &catalogs[&ex.db_id];
            let Some(db_file) = &ex.db_file else {
                return Ok(excluded(&ex.example_id, "database file missing"));
            };
            let mut timings = BTreeMap::new();
            let start = Instant::now();
            let set_match = match exact_set_match(&t.extracted_sql, &ex.gold_sql, catalog, opts.ignore_values) {
                Ok(m) => m,
                Err(e) => return Ok(excluded(&ex.example_id, format!("quarantined: {e}"))),
            };
            timings.insert("em".to_string(), start.elapsed().as_millis() as u64);
            let start = Instant::now();
            let execution = match execution_accuracy(&t.extracted_sql, &ex.gold_sql, db_file, opts.timeout_ms)? {
                ExecOutcome::Compared(r) => r,
                ExecOutcome::GoldFailed(e) => return Ok(excluded(&ex.example_id, format!("gold query failed: {e}"))),
            };
            timings.insert("ex".to_string(), start.elapsed().as_millis() as u64);
            if let Some(wall) = &t.wall_ms {
                timings.extend(wall.iter().map(|(k, v)| (k.clone(), *v)));
            }
            let gold_link = ex.gold_link(catalog).unwrap_or_default();
            Ok(Scored::Verdict(SqlVerdict {
                example_id: ex.example_id.clone(),
                exact_match: set_match.matched,
                execution_match: execution == Ok(true),
                failure_kind: diagnose(&set_match, execution),
                link: opts.link_metrics.then(|| score_linking(&predicted_link(t), &gold_link)),
                timings: opts.timings.then_some(timings),
            }))
        })
        .collect();

    let mut verdicts = Vec::new();
    let mut excluded_list = Vec::new();
    for s in scored {
        match s? {
            Scored::Verdict(v) => verdicts.push(v),
            Scored::Excluded(e) => excluded_list.push(e),
        }
    }
    for (i, ex) in split.examples.iter().enumerate() {
        if traced.contains(&i) {
            continue;
        }
        let reason = match ex.gold_link(&catalogs[&ex.db_id]) {
            Err(e) => format!("quarantined: {e}"),
            Ok(_) => "no trace".into(),
        };
        excluded_list.push(Excluded {
            example_id: ex.example_id.clone(),
            reason,
        });
    }
    let mut report = aggregate(verdicts, mode, excluded_list, opts.ignore_values)?;
    report.model = opts.model.clone();
    Ok(report)
}

/// Writes `verdicts.jsonl`, `report.json` and `report.txt` into `dir`.
pub fn write_report(dir: &Path, report: &EvalReport) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("verdicts.jsonl"))?);
    for v in &report.verdicts {
        serde_json::to_writer(&mut w, v)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    fs::write(dir.join("report.txt"), report.to_table())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_links_by_mode() {
        let t = TwoStageTrace {
            example_id: "x:0".into(),
            db_id: "d".into(),
            mode: InferenceMode::Dts,
            stage1_prompt: Some(String::new()),
            stage1_completion: Some(String::new()),
            predicted_link: None,
            link_warnings: vec![],
            link_fallback: false,
            resolved_link: LinkTarget::new(["a"], Vec::<(String, String)>::new()),
            stage2_prompt: None,
            stage2_completion: String::new(),
            extracted_sql: String::new(),
            failure: Some("stage 1: down".into()),
            wall_ms: None,
        };
        assert!(predicted_link(&t).is_empty());
        let oracle = TwoStageTrace {
            mode: InferenceMode::OracleLink,
            ..t
        };
        assert_eq!(predicted_link(&oracle).tables.len(), 1);
    }
}
