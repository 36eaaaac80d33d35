//! Execution accuracy against SQLite database files.

use std::path::Path;
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::Connection;
use splitlink_core::evalx::{results_match, Cell, FailureKind, Row};
use splitlink_core::sqlast::has_top_level_order_by;

use crate::catalog_io::open_read_only;

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

/// SQLite VM steps between deadline checks.
const PROGRESS_STEPS: i32 = 1_000;

#[derive(Debug, Clone, PartialEq)]
pub enum ExecOutcome {
    /// Both queries were run (or the prediction failed to run).
    Compared(Result<bool, FailureKind>),
    /// The gold query itself failed; the example is not a valid test.
    GoldFailed(String),
}

/// The database could not be opened: an infrastructure problem, never
/// charged to the model.
#[derive(Debug, thiserror::Error)]
#[error("cannot open {path}: {source}")]
pub struct DbUnavailable {
    pub path: String,
    #[source]
    pub source: rusqlite::Error,
}

#[derive(Debug)]
enum RunError {
    Timeout,
    Failed(String),
}

#[derive(Debug)]
struct ResultTable {
    width: usize,
    rows: Vec<Row>,
}

fn cell(v: ValueRef<'_>) -> Cell {
    match v {
        ValueRef::Null => Cell::Null,
        ValueRef::Integer(i) => Cell::Integer(i),
        ValueRef::Real(r) => Cell::Real(r),
        ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Cell::Blob(b.to_vec()),
    }
}

fn run(conn: &Connection, sql: &str, timeout: Duration) -> Result<ResultTable, RunError> {
    let deadline = Instant::now() + timeout;
    conn.progress_handler(PROGRESS_STEPS, Some(move || Instant::now() >= deadline));
    let result = (|| {
        let mut stmt = conn.prepare(sql)?;
        let width = stmt.column_count();
        let mut rows = Vec::new();
        let mut cursor = stmt.query([])?;
        while let Some(r) = cursor.next()? {
            rows.push((0..width).map(|i| r.get_ref(i).map(cell)).collect::<Result<Row, _>>()?);
        }
        Ok::<_, rusqlite::Error>(ResultTable { width, rows })
    })();
    conn.progress_handler(0, None::<fn() -> bool>);
    result.map_err(|e| match e {
        rusqlite::Error::SqliteFailure(f, _) if f.code == rusqlite::ErrorCode::OperationInterrupted => {
            RunError::Timeout
        }
        other => RunError::Failed(other.to_string()),
    })
}

/// Runs both queries read-only and compares their results: as sequences
/// when the gold query's outermost level has ORDER BY, otherwise as
/// multisets of rows. Column order may differ; column count may not.
pub fn execution_accuracy(
    pred: &str,
    gold: &str,
    db_file: &Path,
    timeout_ms: u64,
) -> Result<ExecOutcome, DbUnavailable> {
    let unavailable = |source| DbUnavailable {
        path: db_file.display().to_string(),
        source,
    };
    let conn = open_read_only(db_file).map_err(unavailable)?;
    conn.query_row("SELECT count(*) FROM sqlite_master", [], |r| r.get::<_, i64>(0))
        .map_err(unavailable)?;
    let timeout = Duration::from_millis(timeout_ms);
    let gold_table = match run(&conn, gold, timeout) {
        Ok(t) => t,
        Err(RunError::Timeout) => return Ok(ExecOutcome::GoldFailed(format!("gold query exceeded {timeout_ms} ms"))),
        Err(RunError::Failed(e)) => return Ok(ExecOutcome::GoldFailed(e)),
    };
    if pred.trim().is_empty() {
        return Ok(ExecOutcome::Compared(Err(FailureKind::PredExecError)));
    }
    let pred_table = match run(&conn, pred, timeout) {
        Ok(t) => t,
        Err(RunError::Timeout) => return Ok(ExecOutcome::Compared(Err(FailureKind::Timeout))),
        Err(RunError::Failed(_)) => return Ok(ExecOutcome::Compared(Err(FailureKind::PredExecError))),
    };
    let ordered = has_top_level_order_by(gold);
    let same = pred_table.width == gold_table.width && results_match(&pred_table.rows, &gold_table.rows, ordered);
    Ok(ExecOutcome::Compared(Ok(same)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db() -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.sqlite");
        let conn = Connection::open(&path).unwrap();
        conn.execute_batch(
            "CREATE TABLE t (id INTEGER PRIMARY KEY, name TEXT, score REAL);
             INSERT INTO t VALUES (1, 'b', 2.5), (2, 'a', 1.0), (3, 'c', NULL);",
        )
        .unwrap();
        (dir, path)
    }

    fn check(pred: &str, gold: &str) -> ExecOutcome {
        let (_dir, path) = db();
        execution_accuracy(pred, gold, &path, 5_000).unwrap()
    }

    #[test]
    fn single_cell_arithmetic() {
        assert_eq!(check("SELECT 2-1", "SELECT 1"), ExecOutcome::Compared(Ok(true)));
    }

    #[test]
    fn order_sensitivity_follows_gold() {
        let by_name = "SELECT name FROM t ORDER BY name";
        let by_id = "SELECT name FROM t ORDER BY id";
        // rows come back in different orders
        assert_eq!(check(by_id, "SELECT name FROM t"), ExecOutcome::Compared(Ok(true)));
        assert_eq!(check(by_id, by_name), ExecOutcome::Compared(Ok(false)));
        assert_eq!(check(by_name, by_name), ExecOutcome::Compared(Ok(true)));
    }

    #[test]
    fn failures_are_classified() {
        assert_eq!(
            check("SELECT nope FROM t", "SELECT 1"),
            ExecOutcome::Compared(Err(FailureKind::PredExecError))
        );
        assert_eq!(
            check("", "SELECT 1"),
            ExecOutcome::Compared(Err(FailureKind::PredExecError))
        );
        assert!(matches!(
            check("SELECT 1", "SELECT nope FROM t"),
            ExecOutcome::GoldFailed(_)
        ));
        assert_eq!(
            check("SELECT id, name FROM t", "SELECT id FROM t"),
            ExecOutcome::Compared(Ok(false))
        );
        // writes are refused by the read-only session
        assert_eq!(
            check("DELETE FROM t", "SELECT 1"),
            ExecOutcome::Compared(Err(FailureKind::PredExecError))
        );
    }

    #[test]
    fn runaway_query_times_out() {
        let (_dir, path) = db();
        let slow = "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) SELECT count(*) FROM c";
        let start = Instant::now();
        let out = execution_accuracy(slow, "SELECT 1", &path, 200).unwrap();
        assert_eq!(out, ExecOutcome::Compared(Err(FailureKind::Timeout)));
        assert!(start.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn missing_database_is_infrastructure() {
        let dir = tempfile::tempdir().unwrap();
        assert!(execution_accuracy("SELECT 1", "SELECT 1", &dir.path().join("none.sqlite"), 100).is_err());
    }
}
