//! Reading schema-linker completions and scoring them against gold links.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::{DatabaseCatalog, TableDef};
use crate::link::LinkTarget;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkParse {
    pub target: LinkTarget,
    pub warnings: Vec<String>,
}

/// Best-effort inverse of [`LinkTarget::serialize`], total on any input.
///
/// Names are matched to the catalog by lowercase equality first, then with
/// all non-alphanumeric characters removed. Unmatched names are dropped with
/// a warning; a column whose table was not listed pulls that table in.
pub fn parse_linker_output(text: &str, catalog: &DatabaseCatalog) -> LinkParse {
    let mut warnings = Vec::new();
    let mut target = LinkTarget::default();
    let mut tables_line = None;
    let mut columns_line = None;
    for line in text.lines() {
        let line = line.trim().trim_start_matches(['-', '*', '#', ' ']);
        if tables_line.is_none() {
            tables_line = labeled(line, "tables");
        }
        if columns_line.is_none() {
            columns_line = labeled(line, "columns");
        }
    }
    if tables_line.is_none() && columns_line.is_none() {
        warnings.push("no `tables:` or `columns:` line in linker output".into());
        return LinkParse { target, warnings };
    }
    for item in items(tables_line.unwrap_or("")) {
        match match_table(catalog, item) {
            Some(t) => {
                target.tables.insert(t.name.normal.clone());
            }
            None => warnings.push(format!("dropped unknown table `{item}`")),
        }
    }
    for item in items(columns_line.unwrap_or("")) {
        match match_column(catalog, &target, item) {
            Some((t, c)) => {
                target.tables.insert(t.clone());
                target.columns.insert((t, c));
            }
            None => warnings.push(format!("dropped unknown column `{item}`")),
        }
    }
    LinkParse { target, warnings }
}

fn labeled<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let head = line.get(..label.len())?;
    if !head.eq_ignore_ascii_case(label) {
        return None;
    }
    line[label.len()..].trim_start().strip_prefix(':')
}

fn items(body: &str) -> impl Iterator<Item = &str> {
    body.split(',')
        .map(|s| s.trim().trim_matches(['`', '"', '\'', '[', ']']).trim())
        .filter(|s| !s.is_empty())
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn match_table<'a>(catalog: &'a DatabaseCatalog, name: &str) -> Option<&'a TableDef> {
    catalog.table(name).or_else(|| {
        let key = squash(name);
        catalog.tables.iter().find(|t| squash(&t.name.normal) == key)
    })
}

fn match_column_in(table: &TableDef, name: &str) -> Option<String> {
    table.column(name).map(|c| c.name.normal.clone()).or_else(|| {
        let key = squash(name);
        table
            .columns
            .iter()
            .find(|c| squash(&c.name.normal) == key)
            .map(|c| c.name.normal.clone())
    })
}

fn match_column(catalog: &DatabaseCatalog, so_far: &LinkTarget, item: &str) -> Option<(String, String)> {
    if let Some((t, c)) = item.split_once('.') {
        let table = match_table(catalog, t.trim_matches(['`', '"']))?;
        let column = match_column_in(table, c.trim_matches(['`', '"']))?;
        return Some((table.name.normal.clone(), column));
    }
    // Bare column: accept only when exactly one candidate table has it,
    // looking at the already-linked tables before the whole catalog.
    let unique = |tables: &mut dyn Iterator<Item = &TableDef>| {
        let hits: Vec<(String, String)> = tables
            .filter_map(|t| match_column_in(t, item).map(|c| (t.name.normal.clone(), c)))
            .collect();
        (hits.len() == 1).then(|| hits.into_iter().next().expect("one hit"))
    };
    unique(&mut catalog.tables.iter().filter(|t| so_far.tables.contains(&t.name.normal)))
        .or_else(|| unique(&mut catalog.tables.iter()))
}

/// Precision, recall and exact match over one element category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub precision: f64,
    pub recall: f64,
    pub exact_match: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkingScore {
    /// Over the merged universe of table names and qualified column names.
    pub precision: f64,
    pub recall: f64,
    /// Table sets and column sets both equal.
    pub exact_match: bool,
    pub tables: CategoryScore,
    pub columns: CategoryScore,
}

/// Empty-set convention: both empty scores 1, exactly one empty scores 0.
fn ratio(hits: usize, denominator: usize, other: usize) -> f64 {
    match (denominator, other) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        (d, _) => hits as f64 / d as f64,
    }
}

fn category(hits: usize, pred: usize, gold: usize, equal: bool) -> CategoryScore {
    CategoryScore {
        precision: ratio(hits, pred, gold),
        recall: ratio(hits, gold, pred),
        exact_match: equal,
    }
}

pub fn score_linking(pred: &LinkTarget, gold: &LinkTarget) -> LinkingScore {
    let table_hits = pred.tables.intersection(&gold.tables).count();
    let column_hits = pred.columns.intersection(&gold.columns).count();
    let tables = category(
        table_hits,
        pred.tables.len(),
        gold.tables.len(),
        pred.tables == gold.tables,
    );
    let columns = category(
        column_hits,
        pred.columns.len(),
        gold.columns.len(),
        pred.columns == gold.columns,
    );
    let pred_n = pred.tables.len() + pred.columns.len();
    let gold_n = gold.tables.len() + gold.columns.len();
    let hits = table_hits + column_hits;
    LinkingScore {
        precision: ratio(hits, pred_n, gold_n),
        recall: ratio(hits, gold_n, pred_n),
        exact_match: tables.exact_match && columns.exact_match,
        tables,
        columns,
    }
}

/// Macro averages across examples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub precision: f64,
    pub recall: f64,
    pub exact_match: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkingSummary {
    pub n: usize,
    pub precision: f64,
    pub recall: f64,
    /// Fraction of examples with equal table and column sets.
    pub exact_match: f64,
    pub tables: CategorySummary,
    pub columns: CategorySummary,
}

pub fn summarize_linking(scores: &[LinkingScore]) -> Option<LinkingSummary> {
    if scores.is_empty() {
        return None;
    }
    let n = scores.len() as f64;
    let mean = |f: &dyn Fn(&LinkingScore) -> f64| scores.iter().map(f).sum::<f64>() / n;
    let rate = |f: &dyn Fn(&LinkingScore) -> bool| scores.iter().filter(|s| f(s)).count() as f64 / n;
    Some(LinkingSummary {
        n: scores.len(),
        precision: mean(&|s| s.precision),
        recall: mean(&|s| s.recall),
        exact_match: rate(&|s| s.exact_match),
        tables: CategorySummary {
            precision: mean(&|s| s.tables.precision),
            recall: mean(&|s| s.tables.recall),
            exact_match: rate(&|s| s.tables.exact_match),
        },
        columns: CategorySummary {
            precision: mean(&|s| s.columns.precision),
            recall: mean(&|s| s.columns.recall),
            exact_match: rate(&|s| s.columns.exact_match),
        },
    })
}
