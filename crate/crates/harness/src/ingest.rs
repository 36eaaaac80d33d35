//! Benchmark example splits bound to catalogs and database files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use splitlink_core::sqlast::extract_link_targets;
use splitlink_core::{parse_sql, DatabaseCatalog, LinkTarget};

use crate::catalog_io::{db_file, json_error, read, Catalogs, LoadError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    /// `<split name>:<index>`.
    pub example_id: String,
    pub question: String,
    pub gold_sql: String,
    pub db_id: String,
    /// `None` when the database file is missing: the example still feeds
    /// datasets and inference but cannot be executed.
    pub db_file: Option<PathBuf>,
}

impl Example {
    pub fn execution_eligible(&self) -> bool {
        self.db_file.is_some()
    }

    /// Gold link target, or the quarantine reason when the gold query is
    /// outside the supported dialect or uses no table.
    pub fn gold_link(&self, catalog: &DatabaseCatalog) -> Result<LinkTarget, String> {
        let query = parse_sql(&self.gold_sql, catalog).map_err(|e| e.to_string())?;
        let link = extract_link_targets(&query);
        if link.tables.is_empty() {
            return Err("gold query references no table".into());
        }
        Ok(link)
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub name: String,
    pub examples: Vec<Example>,
    pub db_root: PathBuf,
}

impl Split {
    pub fn ineligible(&self) -> impl Iterator<Item = &Example> {
        self.examples.iter().filter(|e| !e.execution_eligible())
    }
}

#[derive(Deserialize)]
struct RawExample {
    // Spider-SYN keeps the rewritten question under its own key.
    #[serde(alias = "SpiderSynQuestion")]
    question: String,
    query: String,
    db_id: String,
}

#[derive(Debug, thiserror::Error)]
pub enum SplitError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("unknown db_id: {}", .0.join(", "))]
    UnknownDb(Vec<String>),
}

pub fn load_split(examples_file: &Path, name: &str, catalogs: &Catalogs, db_root: &Path) -> Result<Split, SplitError> {
    let text = read(examples_file)?;
    let raw: Vec<RawExample> = serde_json::from_str(&text).map_err(|e| json_error(examples_file, &text, &e))?;
    let unknown: BTreeSet<&str> = raw
        .iter()
        .map(|r| r.db_id.as_str())
        .filter(|id| !catalogs.contains_key(*id))
        .collect();
    if !unknown.is_empty() {
        return Err(SplitError::UnknownDb(unknown.into_iter().map(String::from).collect()));
    }
    let examples = raw
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let file = db_file(db_root, &r.db_id);
            Example {
                example_id: format!("{name}:{i}"),
                question: r.question,
                gold_sql: r.query,
                db_file: file.is_file().then_some(file),
                db_id: r.db_id,
            }
        })
        .collect();
    Ok(Split {
        name: name.into(),
        examples,
        db_root: db_root.to_path_buf(),
    })
}

/// Default split name: the examples file stem.
pub fn split_name(examples_file: &Path) -> String {
    examples_file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "split".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn catalogs() -> Catalogs {
        ["a", "b"]
            .into_iter()
            .map(|id| (id.to_string(), DatabaseCatalog::new(id, vec![], vec![]).unwrap()))
            .collect()
    }

    #[test]
    fn ids_follow_file_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("db/a")).unwrap();
        fs::write(dir.path().join("db/a/a.sqlite"), b"").unwrap();
        let p = dir.path().join("dev.json");
        fs::write(
            &p,
            r#"[{"question": "q0", "query": "SELECT 1", "db_id": "a", "query_toks": []},
                {"question": "q1", "query": "SELECT 2", "db_id": "b"},
                {"question": "q2", "query": "SELECT 3", "db_id": "a"}]"#,
        )
        .unwrap();
        let split = load_split(&p, "dev", &catalogs(), &dir.path().join("db")).unwrap();
        let ids: Vec<_> = split.examples.iter().map(|e| e.example_id.as_str()).collect();
        assert_eq!(ids, ["dev:0", "dev:1", "dev:2"]);
        assert!(split.examples[0].execution_eligible());
        assert!(!split.examples[1].execution_eligible());
        assert_eq!(split.ineligible().count(), 1);
        assert_eq!(split_name(&p), "dev");
    }

    #[test]
    fn unknown_databases_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dev.json");
        fs::write(
            &p,
            r#"[{"question": "q", "query": "SELECT 1", "db_id": "zz"},
                {"question": "q", "query": "SELECT 1", "db_id": "a"},
                {"question": "q", "query": "SELECT 1", "db_id": "yy"}]"#,
        )
        .unwrap();
        match load_split(&p, "dev", &catalogs(), dir.path()) {
            Err(SplitError::UnknownDb(ids)) => assert_eq!(ids, ["yy", "zz"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn synonym_question_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("syn.json");
        fs::write(
            &p,
            r#"[{"SpiderSynQuestion": "How many vocalists?", "SpiderQuestion": "How many singers?",
                 "query": "SELECT count(*) FROM singer", "db_id": "a"}]"#,
        )
        .unwrap();
        let split = load_split(&p, "syn", &catalogs(), dir.path()).unwrap();
        assert_eq!(split.examples[0].question, "How many vocalists?");
    }
}
