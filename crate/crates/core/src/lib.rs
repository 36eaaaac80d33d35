//! Pure building blocks for a two-stage (schema linking, then SQL generation)
//! text-to-SQL pipeline.
//!
//! Everything in this crate is `no_std` + `alloc`: the relational schema
//! model, the SQL parser and resolver, link-target extraction, the clause
//! normal form behind exact set match, prompt rendering, and the schema
//! linking metrics. File formats, SQLite access and HTTP live in the
//! `splitlink` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod catalog;
pub mod evalx;
pub mod link;
pub mod linker;
pub mod promptgen;
pub mod sqlast;

pub use catalog::{CatalogError, ColumnDef, ColumnType, DatabaseCatalog, ForeignKey, Ident, TableDef};
pub use evalx::{exact_set_match, results_match, Cell, EvalReport, FailureKind, InferenceMode, SqlVerdict};
pub use link::LinkTarget;
pub use linker::{parse_linker_output, score_linking, LinkingScore};
pub use promptgen::{build_prompt, build_record, PromptRecord, PromptTemplateSet, Stage};
pub use sqlast::{parse_sql, Query, SqlError};
