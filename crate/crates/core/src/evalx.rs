//! SQL metrics: exact set match over clause components, result-table
//! comparison for execution accuracy, and corpus aggregation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::catalog::DatabaseCatalog;
use crate::linker::{summarize_linking, LinkingScore, LinkingSummary};
use crate::sqlast::{clause_components_with, parse_sql, SqlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    PredParseError,
    PredExecError,
    Timeout,
    ResultMismatch,
    ComponentMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    /// One call over every table.
    Full,
    /// Schema linking, then generation over the predicted tables.
    Dts,
    /// Generation over the gold tables.
    OracleLink,
}

impl InferenceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Dts => "dts",
            Self::OracleLink => "oracle_link",
        }
    }

    /// Row label for the report table.
    pub fn tuning_label(self) -> &'static str {
        match self {
            Self::Full => "Full tables",
            Self::Dts => "Two-stage",
            Self::OracleLink => "Upper bound",
        }
    }
}

impl core::str::FromStr for InferenceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Self::Full),
            "dts" => Ok(Self::Dts),
            "oracle_link" | "oracle-link" => Ok(Self::OracleLink),
            other => Err(format!("unknown mode `{other}` (expected full, dts or oracle-link)")),
        }
    }
}

/// Outcome of [`exact_set_match`] for a gold query that parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetMatch {
    pub matched: bool,
    /// `PredParseError` or `ComponentMismatch` when not matched.
    pub failure: Option<FailureKind>,
}

/// Compares clause components. Only a gold parse failure is an error; any
/// problem with the prediction folds into the result.
pub fn exact_set_match(
    pred: &str,
    gold: &str,
    catalog: &DatabaseCatalog,
    ignore_values: bool,
) -> Result<SetMatch, SqlError> {
    let gold = parse_sql(gold, catalog)?;
    let Ok(pred) = parse_sql(pred, catalog) else {
        return Ok(SetMatch {
            matched: false,
            failure: Some(FailureKind::PredParseError),
        });
    };
    let matched = clause_components_with(&pred, ignore_values) == clause_components_with(&gold, ignore_values);
    Ok(SetMatch {
        matched,
        failure: (!matched).then_some(FailureKind::ComponentMismatch),
    })
}

/// One value of a result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

pub const REAL_TOLERANCE: f64 = 1e-6;

fn reals_close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= REAL_TOLERANCE * a.abs().max(b.abs())
}

impl Cell {
    fn rank(&self) -> u8 {
        match self {
            Cell::Null => 0,
            Cell::Integer(_) | Cell::Real(_) => 1,
            Cell::Text(_) => 2,
            Cell::Blob(_) => 3,
        }
    }

    /// Integers compare exactly with each other, numerically with reals;
    /// reals within a relative tolerance; NULL equals NULL.
    pub fn matches(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Null, Cell::Null) => true,
            (Cell::Integer(a), Cell::Integer(b)) => a == b,
            (Cell::Integer(a), Cell::Real(b)) | (Cell::Real(b), Cell::Integer(a)) => reals_close(*a as f64, *b),
            (Cell::Real(a), Cell::Real(b)) => reals_close(*a, *b),
            (Cell::Text(a), Cell::Text(b)) => a == b,
            (Cell::Blob(a), Cell::Blob(b)) => a == b,
            _ => false,
        }
    }

    /// Total order used to line up multisets before pairwise matching.
    fn sort_cmp(&self, other: &Cell) -> Ordering {
        match (self, other) {
            (Cell::Integer(a), Cell::Integer(b)) => a.cmp(b),
            (Cell::Integer(_) | Cell::Real(_), Cell::Integer(_) | Cell::Real(_)) => {
                self.as_f64().total_cmp(&other.as_f64())
            }
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
            (Cell::Blob(a), Cell::Blob(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }

    fn as_f64(&self) -> f64 {
        match self {
            Cell::Integer(i) => *i as f64,
            Cell::Real(r) => *r,
            _ => 0.0,
        }
    }
}

pub type Row = Vec<Cell>;

fn rows_cmp(a: &[Cell], b: &[Cell]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.sort_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(a.len().cmp(&b.len()))
}

fn rows_match(a: &[Cell], b: &[Cell]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.matches(y))
}

fn tables_match(pred: &[Row], gold: &[Row], ordered: bool) -> bool {
    if pred.len() != gold.len() {
        return false;
    }
    if ordered {
        return pred.iter().zip(gold).all(|(p, g)| rows_match(p, g));
    }
    sorted_rows(pred)
        .into_iter()
        .zip(sorted_rows(gold))
        .all(|(p, g)| rows_match(p, g))
}

fn sorted_rows(rows: &[Row]) -> Vec<&Row> {
    let mut v: Vec<&Row> = rows.iter().collect();
    v.sort_by(|a, b| rows_cmp(a, b));
    v
}

fn column(rows: &[Row], j: usize) -> Vec<&Cell> {
    let mut v: Vec<&Cell> = rows.iter().map(|r| &r[j]).collect();
    v.sort_by(|a, b| a.sort_cmp(b));
    v
}

const PERMUTATION_BUDGET: usize = 10_000;

/// Result-table equality for execution accuracy. Rows are compared as a
/// multiset, or in sequence when `ordered`. Columns may appear in any order:
/// the gold table matches if some permutation of the predicted columns makes
/// the tables equal.
pub fn results_match(pred: &[Row], gold: &[Row], ordered: bool) -> bool {
    if pred.len() != gold.len() {
        return false;
    }
    let width = gold.first().map_or(0, Vec::len);
    if pred.iter().chain(gold).any(|r| r.len() != width) {
        // Ragged input only arises from empty tables of different widths.
        return pred.is_empty() && gold.is_empty();
    }
    if tables_match(pred, gold, ordered) {
        return true;
    }
    if width < 2 || gold.is_empty() {
        return false;
    }
    // Candidate predicted columns for each gold column: equal value multisets.
    let gold_cols: Vec<Vec<&Cell>> = (0..width).map(|j| column(gold, j)).collect();
    let pred_cols: Vec<Vec<&Cell>> = (0..width).map(|j| column(pred, j)).collect();
    let candidates: Vec<Vec<usize>> = gold_cols
        .iter()
        .map(|g| {
            (0..width)
                .filter(|&i| pred_cols[i].iter().zip(g).all(|(p, g)| p.matches(g)))
                .collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return false;
    }
    let mut perm = Vec::with_capacity(width);
    let mut used = alloc::vec![false; width];
    let mut budget = PERMUTATION_BUDGET;
    search(pred, gold, ordered, &candidates, &mut perm, &mut used, &mut budget)
}

fn search(
    pred: &[Row],
    gold: &[Row],
    ordered: bool,
    candidates: &[Vec<usize>],
    perm: &mut Vec<usize>,
    used: &mut [bool],
    budget: &mut usize,
) -> bool {
    if perm.len() == candidates.len() {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let permuted: Vec<Row> = pred
            .iter()
            .map(|r| perm.iter().map(|&i| r[i].clone()).collect())
            .collect();
        return tables_match(&permuted, gold, ordered);
    }
    for &i in &candidates[perm.len()] {
        if used[i] {
            continue;
        }
        used[i] = true;
        perm.push(i);
        if search(pred, gold, ordered, candidates, perm, used, budget) {
            return true;
        }
        perm.pop();
        used[i] = false;
    }
    false
}

/// Per-example evaluation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqlVerdict {
    pub example_id: String,
    pub exact_match: bool,
    pub execution_match: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_kind: Option<FailureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkingScore>,
    /// Milliseconds per phase, only when timing was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, u64>>,
}

/// Picks the failure to report when a metric is false. Execution failures
/// come before component differences because they explain both metrics.
pub fn diagnose(set_match: &SetMatch, execution: Result<bool, FailureKind>) -> Option<FailureKind> {
    match (set_match.failure, execution) {
        (Some(FailureKind::PredParseError), _) => Some(FailureKind::PredParseError),
        (_, Err(kind)) => Some(kind),
        (_, Ok(false)) => Some(FailureKind::ResultMismatch),
        (other, Ok(true)) => other,
    }
}

/// An example left out of the accuracy denominators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Excluded {
    pub example_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: InferenceMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub n: usize,
    pub ex_accuracy: f64,
    pub em_accuracy: f64,
    /// Whether EM abstracted literal values.
    pub em_ignore_values: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linking: Option<LinkingSummary>,
    pub verdicts: Vec<SqlVerdict>,
    pub excluded: Vec<Excluded>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no evaluable examples ({excluded} excluded)")]
pub struct EmptyEvaluation {
    pub excluded: usize,
}

pub fn aggregate(
    verdicts: Vec<SqlVerdict>,
    mode: InferenceMode,
    excluded: Vec<Excluded>,
    em_ignore_values: bool,
) -> Result<EvalReport, EmptyEvaluation> {
    let n = verdicts.len();
    if n == 0 {
        return Err(EmptyEvaluation {
            excluded: excluded.len(),
        });
    }
    let rate = |f: fn(&SqlVerdict) -> bool| verdicts.iter().filter(|v| f(v)).count() as f64 / n as f64;
    let ex_accuracy = rate(|v| v.execution_match);
    let em_accuracy = rate(|v| v.exact_match);
    let links: Vec<LinkingScore> = verdicts.iter().filter_map(|v| v.link).collect();
    Ok(EvalReport {
        mode,
        model: None,
        n,
        ex_accuracy,
        em_accuracy,
        em_ignore_values,
        linking: summarize_linking(&links),
        verdicts,
        excluded,
    })
}

fn pct(x: f64) -> String {
    format!("{:.1}", x * 100.0)
}

fn aligned(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

impl EvalReport {
    /// Aligned plain-text table, percentages with one decimal.
    pub fn to_table(&self) -> String {
        let model = self.model.clone().unwrap_or_else(|| "-".into());
        let mut out = aligned(&[
            ["Model", "Tuning", "EX", "EM"].map(String::from).to_vec(),
            alloc::vec![
                model,
                String::from(self.mode.tuning_label()),
                pct(self.ex_accuracy),
                pct(self.em_accuracy)
            ],
        ]);
        if let Some(l) = &self.linking {
            out.push('\n');
            out.push_str(&aligned(&[
                ["Linking", "EX", "PR", "RE"].map(String::from).to_vec(),
                alloc::vec![
                    String::from("tables+columns"),
                    pct(l.exact_match),
                    pct(l.precision),
                    pct(l.recall)
                ],
                alloc::vec![
                    String::from("tables"),
                    pct(l.tables.exact_match),
                    pct(l.tables.precision),
                    pct(l.tables.recall)
                ],
            ]));
        }
        out.push_str(&format!("\nn = {}, excluded = {}\n", self.n, self.excluded.len()));
        out
    }
}

/// One row per report, for comparing runs side by side.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let mut rows = alloc::vec![["Model", "Tuning", "EX", "EM", "n"].map(String::from).to_vec()];
    for r in reports {
        rows.push(alloc::vec![
            r.model.clone().unwrap_or_else(|| "-".into()),
            String::from(r.mode.tuning_label()),
            pct(r.ex_accuracy),
            pct(r.em_accuracy),
            r.n.to_string(),
        ]);
    }
    aligned(&rows)
}
