//! In-memory relational schema model.
//!
//! A [`DatabaseCatalog`] is built once (from benchmark metadata plus an
//! optional SQLite file for sample rows) and is immutable afterwards.
//! Identifiers keep their original spelling for prompt rendering and carry a
//! lowercase normal form used for every lookup and comparison.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Maximum number of sample rows kept per table.
pub const MAX_SAMPLE_ROWS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("database `{db_id}`: duplicate table `{table}`")]
    DuplicateTable { db_id: String, table: String },
    #[error("database `{db_id}`: table `{table}` has duplicate column `{column}`")]
    DuplicateColumn {
        db_id: String,
        table: String,
        column: String,
    },
    #[error("database `{db_id}`: primary key column `{column}` is not a column of `{table}`")]
    UnknownPrimaryKey {
        db_id: String,
        table: String,
        column: String,
    },
    #[error("database `{db_id}`: foreign key endpoint `{table}.{column}` does not exist")]
    DanglingForeignKey {
        db_id: String,
        table: String,
        column: String,
    },
    #[error("table `{table}`: {reason}")]
    InvalidSampleRows { table: String, reason: String },
}

/// Normalizes an identifier: surrounding whitespace stripped, lowercased.
pub fn normalize(name: &str) -> String {
    name.trim().to_lowercase()
}

/// An identifier with its original spelling and its normal form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ident {
    pub original: String,
    pub normal: String,
}

impl Ident {
    pub fn new(original: impl Into<String>) -> Self {
        let original = original.into();
        let normal = normalize(&original);
        Self { original, normal }
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.original)
    }
}

/// Column type vocabulary of the benchmark metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Text,
    Number,
    Time,
    Boolean,
    Others,
}

impl ColumnType {
    /// Maps a metadata type string; anything unrecognized becomes `Others`.
    pub fn parse(raw: &str) -> Self {
        match normalize(raw).as_str() {
            "text" => Self::Text,
            "number" => Self::Number,
            "time" => Self::Time,
            "boolean" => Self::Boolean,
            _ => Self::Others,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Text => "text",
            Self::Number => "number",
            Self::Time => "time",
            Self::Boolean => "boolean",
            Self::Others => "others",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: Ident,
    pub data_type: ColumnType,
    /// 0-based position within the owning table.
    pub ordinal: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: Ident,
    pub columns: Vec<ColumnDef>,
    /// Normal names of the primary-key columns, in column order.
    pub primary_key: Vec<String>,
    /// Up to [`MAX_SAMPLE_ROWS`] rows of rendered cells, one cell per column.
    pub sample_rows: Vec<Vec<String>>,
}

impl TableDef {
    /// Builds a table from `(name, type)` pairs; ordinals follow the slice order.
    pub fn new(name: &str, columns: &[(&str, ColumnType)], primary_key: &[&str]) -> Self {
        Self {
            name: Ident::new(name),
            columns: columns
                .iter()
                .enumerate()
                .map(|(ordinal, (col, ty))| ColumnDef {
                    name: Ident::new(*col),
                    data_type: *ty,
                    ordinal,
                })
                .collect(),
            primary_key: primary_key.iter().map(|c| normalize(c)).collect(),
            sample_rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        let wanted = normalize(name);
        self.columns.iter().find(|c| c.name.normal == wanted)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column(name).is_some()
    }

    /// Replaces the sample rows after checking the row cap and row widths.
    pub fn set_sample_rows(&mut self, rows: Vec<Vec<String>>) -> Result<(), CatalogError> {
        if rows.len() > MAX_SAMPLE_ROWS {
            return Err(CatalogError::InvalidSampleRows {
                table: self.name.original.clone(),
                reason: alloc::format!("{} rows exceed the cap of {MAX_SAMPLE_ROWS}", rows.len()),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != self.columns.len()) {
            return Err(CatalogError::InvalidSampleRows {
                table: self.name.original.clone(),
                reason: alloc::format!(
                    "row has {} cells but the table has {} columns",
                    bad.len(),
                    self.columns.len()
                ),
            });
        }
        self.sample_rows = rows;
        Ok(())
    }
}

/// A single-column foreign key, endpoints in normal form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
}

impl ForeignKey {
    pub fn new(from_table: &str, from_column: &str, to_table: &str, to_column: &str) -> Self {
        Self {
            from_table: normalize(from_table),
            from_column: normalize(from_column),
            to_table: normalize(to_table),
            to_column: normalize(to_column),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseCatalog {
    pub db_id: String,
    pub tables: Vec<TableDef>,
    pub foreign_keys: Vec<ForeignKey>,
    pub db_file_path: Option<String>,
}

impl DatabaseCatalog {
    /// Validates every structural invariant and builds the catalog.
    pub fn new(
        db_id: impl Into<String>,
        tables: Vec<TableDef>,
        foreign_keys: Vec<ForeignKey>,
    ) -> Result<Self, CatalogError> {
        let catalog = Self {
            db_id: db_id.into(),
            tables,
            foreign_keys,
            db_file_path: None,
        };
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let db_id = || self.db_id.clone();
        for (i, table) in self.tables.iter().enumerate() {
            if self.tables[..i].iter().any(|t| t.name.normal == table.name.normal) {
                return Err(CatalogError::DuplicateTable {
                    db_id: db_id(),
                    table: table.name.normal.clone(),
                });
            }
            for (j, col) in table.columns.iter().enumerate() {
                if table.columns[..j].iter().any(|c| c.name.normal == col.name.normal) {
                    return Err(CatalogError::DuplicateColumn {
                        db_id: db_id(),
                        table: table.name.normal.clone(),
                        column: col.name.normal.clone(),
                    });
                }
            }
            if let Some(pk) = table.primary_key.iter().find(|pk| !table.has_column(pk)) {
                return Err(CatalogError::UnknownPrimaryKey {
                    db_id: db_id(),
                    table: table.name.normal.clone(),
                    column: pk.clone(),
                });
            }
        }
        for fk in &self.foreign_keys {
            for (table, column) in [(&fk.from_table, &fk.from_column), (&fk.to_table, &fk.to_column)] {
                if !self.table(table).is_some_and(|t| t.has_column(column)) {
                    return Err(CatalogError::DanglingForeignKey {
                        db_id: db_id(),
                        table: table.clone(),
                        column: column.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.table_index(name).map(|i| &self.tables[i])
    }

    pub fn table_mut(&mut self, name: &str) -> Option<&mut TableDef> {
        self.table_index(name).map(move |i| &mut self.tables[i])
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        let wanted = normalize(name);
        self.tables.iter().position(|t| t.name.normal == wanted)
    }

    /// Foreign keys whose referencing side is `table`.
    pub fn foreign_keys_from<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a ForeignKey> + 'a {
        self.foreign_keys.iter().filter(move |fk| fk.from_table == table)
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.iter().map(|t| t.name.normal.as_str())
    }

    pub fn with_db_file(mut self, path: impl ToString) -> Self {
        self.db_file_path = Some(path.to_string());
        self
    }
}
