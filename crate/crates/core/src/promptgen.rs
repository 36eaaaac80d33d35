//! Table representations, prompt templates and supervised fine-tuning records
//! for the three training regimes: full schema (`full`), schema linking
//! (`link`) and generation over the linked tables only (`gen`).

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::catalog::{DatabaseCatalog, TableDef};
use crate::sqlast::{extract_link_targets, parse_sql, quote_ident, SqlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Full,
    Link,
    Gen,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Link => "link",
            Self::Gen => "gen",
        }
    }
}

impl core::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Self::Full),
            "link" => Ok(Self::Link),
            "gen" => Ok(Self::Gen),
            other => Err(format!("unknown stage `{other}` (expected full, link or gen)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("template placeholder `{{{0}}}` has no binding")]
    UnknownPlaceholder(String),
    #[error("unbalanced brace at byte {0} of template")]
    UnbalancedBrace(usize),
    #[error("generation prompt needs at least one selected table")]
    EmptySelection,
    #[error("selected table `{0}` is not in the catalog")]
    UnknownTable(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Schema,
    Question,
}

/// A prompt template with `{schema}` and `{question}` placeholders.
/// `{{` and `}}` stand for literal braces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pieces: Vec<Piece>,
}

impl Template {
    pub fn parse(src: &str) -> Result<Self, PromptError> {
        let mut pieces = Vec::new();
        let mut text = String::new();
        let mut rest = src;
        let mut offset = 0;
        while let Some(i) = rest.find(['{', '}']) {
            text.push_str(&rest[..i]);
            let tail = &rest[i..];
            let consumed = if tail.starts_with("{{") {
                text.push('{');
                2
            } else if tail.starts_with("}}") {
                text.push('}');
                2
            } else if tail.starts_with('}') {
                return Err(PromptError::UnbalancedBrace(offset + i));
            } else {
                let end = tail.find('}').ok_or(PromptError::UnbalancedBrace(offset + i))?;
                let piece = match &tail[1..end] {
                    "schema" => Piece::Schema,
                    "question" => Piece::Question,
                    other => return Err(PromptError::UnknownPlaceholder(other.into())),
                };
                if !text.is_empty() {
                    pieces.push(Piece::Text(core::mem::take(&mut text)));
                }
                pieces.push(piece);
                end + 1
            };
            rest = &tail[consumed..];
            offset += i + consumed;
        }
        text.push_str(rest);
        if !text.is_empty() {
            pieces.push(Piece::Text(text));
        }
        Ok(Self { pieces })
    }

    pub fn instantiate(&self, schema: &str, question: &str) -> String {
        let mut out = String::new();
        for p in &self.pieces {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Schema => out.push_str(schema),
                Piece::Question => out.push_str(question),
            }
        }
        out
    }
}

pub const DEFAULT_GENERATION_TEMPLATE: &str = include_str!("../templates/generation.txt");
pub const DEFAULT_LINKING_TEMPLATE: &str = include_str!("../templates/linking.txt");
pub const DEFAULT_GENERATION_SYSTEM: &str = include_str!("../templates/generation_system.txt");
pub const DEFAULT_LINKING_SYSTEM: &str = include_str!("../templates/linking_system.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplateSet {
    /// Used by both the full-schema and the reduced-schema stages.
    pub generation: Template,
    pub linking: Template,
    pub generation_system: String,
    pub linking_system: String,
}

impl Default for PromptTemplateSet {
    fn default() -> Self {
        Self::from_sources(
            DEFAULT_GENERATION_TEMPLATE,
            DEFAULT_LINKING_TEMPLATE,
            DEFAULT_GENERATION_SYSTEM,
            DEFAULT_LINKING_SYSTEM,
        )
        .expect("shipped templates are valid")
    }
}

impl PromptTemplateSet {
    pub fn from_sources(
        generation: &str,
        linking: &str,
        gen_system: &str,
        link_system: &str,
    ) -> Result<Self, PromptError> {
        Ok(Self {
            generation: Template::parse(generation)?,
            linking: Template::parse(linking)?,
            generation_system: gen_system.trim().to_string(),
            linking_system: link_system.trim().to_string(),
        })
    }

    pub fn template(&self, stage: Stage) -> &Template {
        match stage {
            Stage::Link => &self.linking,
            Stage::Full | Stage::Gen => &self.generation,
        }
    }

    pub fn system(&self, stage: Stage) -> &str {
        match stage {
            Stage::Link => &self.linking_system,
            Stage::Full | Stage::Gen => &self.generation_system,
        }
    }
}

/// CREATE TABLE style block: one line per typed column, the primary key, one
/// line per outgoing foreign key, then a comment with a tab-separated header
/// and one line per sample row.
pub fn render_table(catalog: &DatabaseCatalog, table: &TableDef) -> String {
    let mut lines: Vec<String> = table
        .columns
        .iter()
        .map(|c| format!("  {} {}", quote_ident(&c.name.original), c.data_type.as_str()))
        .collect();
    if !table.primary_key.is_empty() {
        let pk: Vec<String> = table
            .primary_key
            .iter()
            .filter_map(|k| table.column(k))
            .map(|c| quote_ident(&c.name.original))
            .collect();
        lines.push(format!("  PRIMARY KEY ({})", pk.join(", ")));
    }
    for fk in catalog.foreign_keys_from(&table.name.normal) {
        let from = table
            .column(&fk.from_column)
            .map_or(fk.from_column.clone(), |c| c.name.original.clone());
        let (to_table, to_column) = match catalog.table(&fk.to_table) {
            Some(t) => (
                t.name.original.clone(),
                t.column(&fk.to_column)
                    .map_or(fk.to_column.clone(), |c| c.name.original.clone()),
            ),
            None => (fk.to_table.clone(), fk.to_column.clone()),
        };
        lines.push(format!(
            "  FOREIGN KEY ({}) REFERENCES {} ({})",
            quote_ident(&from),
            quote_ident(&to_table),
            quote_ident(&to_column)
        ));
    }
    let mut out = format!(
        "CREATE TABLE {} (\n{}\n);\n/*\n",
        quote_ident(&table.name.original),
        lines.join(",\n")
    );
    if !table.sample_rows.is_empty() {
        let header: Vec<&str> = table.columns.iter().map(|c| c.name.original.as_str()).collect();
        let _ = writeln!(out, "{}", header.join("\t"));
        for row in &table.sample_rows {
            let _ = writeln!(out, "{}", row.join("\t"));
        }
    }
    out.push_str("*/");
    out
}

/// Table blocks in catalog order, optionally restricted to `only`.
pub fn render_schema(catalog: &DatabaseCatalog, only: Option<&BTreeSet<String>>) -> String {
    catalog
        .tables
        .iter()
        .filter(|t| only.is_none_or(|sel| sel.contains(&t.name.normal)))
        .map(|t| render_table(catalog, t))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Instantiates the stage's template. `full` and `link` show every table and
/// ignore `selected`; `gen` shows only the selected tables.
pub fn build_prompt(
    stage: Stage,
    question: &str,
    catalog: &DatabaseCatalog,
    selected: Option<&BTreeSet<String>>,
    templates: &PromptTemplateSet,
) -> Result<String, PromptError> {
    let schema = match stage {
        Stage::Full | Stage::Link => render_schema(catalog, None),
        Stage::Gen => {
            let sel = selected.filter(|s| !s.is_empty()).ok_or(PromptError::EmptySelection)?;
            if let Some(missing) = sel.iter().find(|t| catalog.table(t).is_none()) {
                return Err(PromptError::UnknownTable(missing.clone()));
            }
            render_schema(catalog, Some(sel))
        }
    };
    Ok(templates.template(stage).instantiate(&schema, question))
}

/// One supervised fine-tuning example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub example_id: String,
    pub stage: Stage,
    pub prompt: String,
    pub completion: String,
    pub db_id: String,
}

/// Why an example produced no record.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("gold SQL outside the supported dialect: {0}")]
    GoldSql(#[from] SqlError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Builds the record for one gold example. The gold query must parse for
/// every stage so the three datasets cover the same examples.
pub fn build_record(
    stage: Stage,
    example_id: &str,
    question: &str,
    gold_sql: &str,
    catalog: &DatabaseCatalog,
    templates: &PromptTemplateSet,
) -> Result<PromptRecord, RecordError> {
    let gold = parse_sql(gold_sql, catalog)?;
    let link = extract_link_targets(&gold);
    let prompt = build_prompt(stage, question, catalog, Some(&link.tables), templates)?;
    let completion = match stage {
        Stage::Link => link.serialize(catalog),
        Stage::Full | Stage::Gen => gold_sql.trim().to_string(),
    };
    Ok(PromptRecord {
        example_id: example_id.into(),
        stage,
        prompt,
        completion,
        db_id: catalog.db_id.clone(),
    })
}

/// Table names of the `CREATE TABLE` blocks in a rendered prompt.
pub fn prompt_table_blocks(prompt: &str) -> Vec<String> {
    prompt
        .lines()
        .filter_map(|l| l.strip_prefix("CREATE TABLE "))
        .filter_map(|rest| rest.strip_suffix(" ("))
        .map(|name| name.trim_matches('`').replace("``", "`"))
        .collect()
}
