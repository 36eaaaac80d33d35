//! Parsing, resolution and analysis of the benchmark SQL dialect.
//!
//! Supported surface: `SELECT [DISTINCT] ... FROM ... [JOIN ... ON ...]`,
//! `WHERE`, `GROUP BY`, `HAVING`, `ORDER BY`, `LIMIT`, the compound
//! operators `UNION` / `INTERSECT` / `EXCEPT`, nested subqueries in FROM,
//! WHERE and HAVING, the five aggregates, `BETWEEN` / `IN` / `LIKE` /
//! `EXISTS` / `IS NULL`, and arithmetic. Anything else is a syntax error.

use alloc::string::String;
use alloc::vec::Vec;

mod ast;
mod components;
mod extract;
mod lexer;
mod parser;
mod render;
mod resolve;

pub use ast::*;
pub use components::{
    clause_components, clause_components_with, normalize_query, BodyComponents, Components, SelectComponents,
};
pub use extract::extract_link_targets;
pub(crate) use render::quote_ident;
pub use render::render;

use crate::catalog::DatabaseCatalog;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SqlError {
    #[error("lexical error at byte {position}: {message}")]
    Lex { position: usize, message: String },
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("cannot resolve `{identifier}`: {message}")]
    Resolve { identifier: String, message: String },
}

impl SqlError {
    pub(crate) fn lex(position: usize, message: impl Into<String>) -> Self {
        Self::Lex {
            position,
            message: message.into(),
        }
    }

    pub(crate) fn syntax(position: usize, message: impl Into<String>) -> Self {
        Self::Syntax {
            position,
            message: message.into(),
        }
    }

    pub(crate) fn resolve(identifier: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Resolve {
            identifier: identifier.into(),
            message: message.into(),
        }
    }
}

/// A resolved query plus the warnings recorded while resolving it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub query: Query,
    pub warnings: Vec<String>,
}

/// Parses and resolves `sql` against `catalog`.
pub fn parse_sql(sql: &str, catalog: &DatabaseCatalog) -> Result<Query, SqlError> {
    parse_sql_traced(sql, catalog).map(|p| p.query)
}

/// Like [`parse_sql`], also returning resolution warnings (for example an
/// ambiguous unqualified column bound to the first matching FROM table).
pub fn parse_sql_traced(sql: &str, catalog: &DatabaseCatalog) -> Result<Parsed, SqlError> {
    let mut query = parser::parse_statement(sql)?;
    let mut resolver = resolve::Resolver::new(catalog);
    resolver.query(&mut query)?;
    Ok(Parsed {
        query,
        warnings: resolver.warnings,
    })
}

/// True when the statement's outermost query carries an ORDER BY. Only the
/// token stream is inspected, so no catalog is needed.
pub fn has_top_level_order_by(sql: &str) -> bool {
    let Ok(tokens) = lexer::tokenize(sql) else {
        return false;
    };
    let mut depth = 0i32;
    for (i, t) in tokens.iter().enumerate() {
        match t.kind {
            lexer::TokenKind::LParen => depth += 1,
            lexer::TokenKind::RParen => depth -= 1,
            _ if depth == 0 && t.is_word("order") && tokens.get(i + 1).is_some_and(|n| n.is_word("by")) => {
                return true;
            }
            _ => {}
        }
    }
    false
}
