//! Benchmark `tables.json` ingestion and sample rows from SQLite files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::Deserialize;
use serde_json::Value as Json;
use splitlink_core::catalog::{ColumnType, DatabaseCatalog, ForeignKey, TableDef, MAX_SAMPLE_ROWS};
use splitlink_core::CatalogError;

/// Catalogs keyed by `db_id`.
pub type Catalogs = BTreeMap<String, DatabaseCatalog>;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON at line {line}, column {column} (byte {offset}): {message}")]
    Json {
        path: PathBuf,
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },
    #[error("schema error in database `{db_id}`: {message}")]
    Schema { db_id: String, message: String },
    #[error("database `{db_id}` appears twice")]
    DuplicateDb { db_id: String },
}

/// Maps a serde_json error position to a byte offset in `text`.
pub(crate) fn json_error(path: &Path, text: &str, e: &serde_json::Error) -> LoadError {
    let (line, column) = (e.line(), e.column());
    let offset = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + column.saturating_sub(1);
    LoadError::Json {
        path: path.to_path_buf(),
        line,
        column,
        offset,
        message: e.to_string(),
    }
}

pub(crate) fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Deserialize)]
struct RawSchema {
    db_id: String,
    table_names_original: Vec<String>,
    column_names_original: Vec<(i64, String)>,
    column_types: Vec<String>,
    #[serde(default)]
    primary_keys: Vec<Json>,
    #[serde(default)]
    foreign_keys: Vec<(usize, usize)>,
}

impl RawSchema {
    fn into_catalog(self) -> Result<DatabaseCatalog, LoadError> {
        let db_id = self.db_id.clone();
        let err = |message: String| LoadError::Schema {
            db_id: db_id.clone(),
            message,
        };
        if self.column_types.len() != self.column_names_original.len() {
            return Err(err(format!(
                "{} column types for {} columns",
                self.column_types.len(),
                self.column_names_original.len()
            )));
        }
        let mut columns: Vec<Vec<(String, ColumnType)>> = vec![Vec::new(); self.table_names_original.len()];
        for (i, (table, name)) in self.column_names_original.iter().enumerate() {
            if *table < 0 {
                // the `*` pseudo-column
                continue;
            }
            let cols = columns
                .get_mut(*table as usize)
                .ok_or_else(|| err(format!("column {i} (`{name}`) names table index {table}, out of range")))?;
            cols.push((name.clone(), ColumnType::parse(&self.column_types[i])));
        }
        // Global column index -> (table index, column name).
        let locate = |i: usize| -> Result<(usize, &str), LoadError> {
            match self.column_names_original.get(i) {
                Some((t, name)) if *t >= 0 => Ok((*t as usize, name.as_str())),
                _ => Err(err(format!("column index {i} out of range"))),
            }
        };
        let mut primary: Vec<Vec<String>> = vec![Vec::new(); self.table_names_original.len()];
        let mut key_indices = Vec::new();
        for pk in &self.primary_keys {
            match pk {
                Json::Number(n) => key_indices.push(n.as_u64()),
                Json::Array(items) => key_indices.extend(items.iter().map(Json::as_u64)),
                _ => key_indices.push(None),
            }
        }
        for k in key_indices {
            let k = k.ok_or_else(|| err("primary key entry is not a column index".into()))?;
            let (t, name) = locate(k as usize)?;
            primary[t].push(name.to_string());
        }
        let tables = self
            .table_names_original
            .iter()
            .enumerate()
            .map(|(ti, name)| {
                let cols: Vec<(&str, ColumnType)> = columns[ti].iter().map(|(n, t)| (n.as_str(), *t)).collect();
                let pk: Vec<&str> = primary[ti].iter().map(String::as_str).collect();
                TableDef::new(name, &cols, &pk)
            })
            .collect();
        let mut fks = Vec::new();
        for &(from, to) in &self.foreign_keys {
            let (ft, fc) = locate(from)?;
            let (tt, tc) = locate(to)?;
            fks.push(ForeignKey::new(
                &self.table_names_original[ft],
                fc,
                &self.table_names_original[tt],
                tc,
            ));
        }
        DatabaseCatalog::new(&self.db_id, tables, fks).map_err(|e: CatalogError| err(e.to_string()))
    }
}

/// Reads a benchmark `tables.json`: one catalog per `db_id`.
pub fn load_catalogs(path: &Path) -> Result<Catalogs, LoadError> {
    let text = read(path)?;
    let raw: Vec<RawSchema> = serde_json::from_str(&text).map_err(|e| json_error(path, &text, &e))?;
    let mut out = Catalogs::new();
    for schema in raw {
        let catalog = schema.into_catalog()?;
        let db_id = catalog.db_id.clone();
        if out.insert(db_id.clone(), catalog).is_some() {
            return Err(LoadError::DuplicateDb { db_id });
        }
    }
    Ok(out)
}

/// Conventional database file location under a benchmark root.
pub fn db_file(db_root: &Path, db_id: &str) -> PathBuf {
    db_root.join(db_id).join(format!("{db_id}.sqlite"))
}

pub(crate) fn open_read_only(path: &Path) -> rusqlite::Result<Connection> {
    Connection::open_with_flags(
        path,
        OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX | OpenFlags::SQLITE_OPEN_URI,
    )
}

const MAX_CELL_CHARS: usize = 64;

/// One sample cell as shown in prompts. Tabs and line breaks become spaces
/// so a row stays on one line.
pub fn render_cell(v: ValueRef<'_>) -> String {
    let text = match v {
        ValueRef::Null => return "NULL".into(),
        ValueRef::Integer(i) => return i.to_string(),
        ValueRef::Real(r) => return r.to_string(),
        ValueRef::Text(t) => String::from_utf8_lossy(t).into_owned(),
        ValueRef::Blob(b) => return format!("<blob {} bytes>", b.len()),
    };
    let flat: String = text.chars().map(|c| if c.is_control() { ' ' } else { c }).collect();
    if flat.chars().count() > MAX_CELL_CHARS {
        let cut: String = flat.chars().take(MAX_CELL_CHARS).collect();
        format!("{cut}...")
    } else {
        flat
    }
}

fn quote(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn sample_rows(conn: &Connection, table: &TableDef, max_rows: usize) -> rusqlite::Result<Vec<Vec<String>>> {
    let cols: Vec<String> = table.columns.iter().map(|c| quote(&c.name.original)).collect();
    let base = format!("SELECT {} FROM {}", cols.join(", "), quote(&table.name.original));
    // WITHOUT ROWID tables have no rowid; their storage order is the key order.
    let mut stmt = match conn.prepare(&format!("{base} ORDER BY rowid LIMIT {max_rows}")) {
        Ok(s) => s,
        Err(_) => conn.prepare(&format!("{base} LIMIT {max_rows}"))?,
    };
    let width = table.columns.len();
    let rows = stmt.query_map([], |row| (0..width).map(|i| row.get_ref(i).map(render_cell)).collect())?;
    rows.collect()
}

/// Fills `sample_rows` of every table with the first `max_rows` rows by
/// rowid. Returns one warning per table that could not be read.
pub fn attach_samples(catalog: &mut DatabaseCatalog, db_file: &Path, max_rows: usize) -> rusqlite::Result<Vec<String>> {
    let conn = open_read_only(db_file)?;
    // Opening is lazy; touch the schema so an unreadable file fails here.
    conn.query_row("SELECT count(*) FROM sqlite_master", [], |r| r.get::<_, i64>(0))?;
    let max_rows = max_rows.min(MAX_SAMPLE_ROWS);
    let mut warnings = Vec::new();
    for table in &mut catalog.tables {
        match sample_rows(&conn, table, max_rows) {
            Ok(rows) => table.set_sample_rows(rows).expect("rows sized to the catalog"),
            Err(e) => {
                table.sample_rows.clear();
                warnings.push(format!(
                    "{}: no sample rows for `{}`: {e}",
                    catalog.db_id, table.name.original
                ));
            }
        }
    }
    Ok(warnings)
}
