//! The (tables, columns) pair a query uses, and its two-line text form.
//!
//! ```text
//! tables: concert, stadium
//! columns: concert.Stadium_ID, stadium.Stadium_ID, stadium.Name
//! ```
//!
//! Entries are listed in catalog order with their original spelling.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::DatabaseCatalog;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkTarget {
    /// Table normal names.
    pub tables: BTreeSet<String>,
    /// `(table, column)` normal-name pairs.
    pub columns: BTreeSet<(String, String)>,
}

impl LinkTarget {
    pub fn new<T, C, A, B>(tables: T, columns: C) -> Self
    where
        T: IntoIterator,
        T::Item: Into<String>,
        C: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        Self {
            tables: tables.into_iter().map(Into::into).collect(),
            columns: columns.into_iter().map(|(t, c)| (t.into(), c.into())).collect(),
        }
    }

    /// Every table of the catalog, no columns.
    pub fn all_tables(catalog: &DatabaseCatalog) -> Self {
        Self {
            tables: catalog.table_names().map(String::from).collect(),
            columns: BTreeSet::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty() && self.columns.is_empty()
    }

    /// Every column's table is listed among the tables.
    pub fn is_consistent(&self) -> bool {
        self.columns.iter().all(|(t, _)| self.tables.contains(t))
    }

    /// Two-line completion text. Names missing from the catalog are
    /// appended after the catalog-ordered ones, as stored.
    pub fn serialize(&self, catalog: &DatabaseCatalog) -> String {
        let mut tables: Vec<(usize, String)> = self
            .tables
            .iter()
            .map(|t| match catalog.table_index(t) {
                Some(i) => (i, catalog.tables[i].name.original.clone()),
                None => (usize::MAX, t.clone()),
            })
            .collect();
        tables.sort();
        let mut columns: Vec<((usize, usize), String)> = self
            .columns
            .iter()
            .map(|(t, c)| {
                let found = catalog.table_index(t).and_then(|ti| {
                    let table = &catalog.tables[ti];
                    table.column(c).map(|col| {
                        (
                            (ti, col.ordinal),
                            format!("{}.{}", table.name.original, col.name.original),
                        )
                    })
                });
                found.unwrap_or(((usize::MAX, usize::MAX), format!("{t}.{c}")))
            })
            .collect();
        columns.sort();
        let join = |items: Vec<String>| items.join(", ");
        let tables = join(tables.into_iter().map(|(_, n)| n).collect());
        let columns = join(columns.into_iter().map(|(_, n)| n).collect());
        let line = |label: &str, body: String| {
            if body.is_empty() {
                format!("{label}:")
            } else {
                format!("{label}: {body}")
            }
        };
        format!("{}\n{}", line("tables", tables), line("columns", columns))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ColumnType, ForeignKey, TableDef};
    use alloc::vec;

    fn catalog() -> DatabaseCatalog {
        DatabaseCatalog::new(
            "concert_singer",
            vec![
                TableDef::new(
                    "stadium",
                    &[("Stadium_ID", ColumnType::Number), ("Name", ColumnType::Text)],
                    &["Stadium_ID"],
                ),
                TableDef::new(
                    "concert",
                    &[("concert_ID", ColumnType::Number), ("Stadium_ID", ColumnType::Number)],
                    &["concert_ID"],
                ),
            ],
            vec![ForeignKey::new("concert", "Stadium_ID", "stadium", "Stadium_ID")],
        )
        .unwrap()
    }

    #[test]
    fn serializes_in_catalog_order_with_original_names() {
        let t = LinkTarget::new(
            ["concert", "stadium"],
            [
                ("stadium", "name"),
                ("concert", "stadium_id"),
                ("stadium", "stadium_id"),
            ],
        );
        assert_eq!(
            t.serialize(&catalog()),
            "tables: stadium, concert\ncolumns: stadium.Stadium_ID, stadium.Name, concert.Stadium_ID"
        );
    }

    #[test]
    fn empty_sections_have_no_trailing_space() {
        let t = LinkTarget::new(["stadium"], Vec::<(&str, &str)>::new());
        assert_eq!(t.serialize(&catalog()), "tables: stadium\ncolumns:");
        assert_eq!(LinkTarget::default().serialize(&catalog()), "tables:\ncolumns:");
    }

    #[test]
    fn consistency_check() {
        assert!(LinkTarget::new(["stadium"], [("stadium", "name")]).is_consistent());
        assert!(!LinkTarget::new(["concert"], [("stadium", "name")]).is_consistent());
        assert_eq!(LinkTarget::all_tables(&catalog()).tables.len(), 2);
    }
}
