use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use super::SqlError;
use crate::catalog::{normalize, DatabaseCatalog};

struct DerivedColumn {
    name: String,
    origin: Option<(String, String)>,
}

enum ItemKind {
    Table(String),
    Derived(Vec<DerivedColumn>),
}

struct ScopeItem {
    /// Normal alias, if the FROM item had one.
    alias: Option<String>,
    kind: ItemKind,
}

impl ScopeItem {
    fn table_name(&self) -> Option<&str> {
        match &self.kind {
            ItemKind::Table(t) => Some(t),
            ItemKind::Derived(_) => None,
        }
    }

    fn has_column(&self, catalog: &DatabaseCatalog, col: &str) -> bool {
        match &self.kind {
            ItemKind::Table(t) => catalog.table(t).is_some_and(|t| t.has_column(col)),
            ItemKind::Derived(cols) => cols.iter().any(|c| c.name == col),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum AliasMode {
    /// Plain column lookup only.
    Off,
    /// Column lookup, then select-list aliases (GROUP BY, HAVING).
    Fallback,
    /// Select-list aliases first (ORDER BY).
    Prefer,
}

pub(crate) struct Resolver<'a> {
    catalog: &'a DatabaseCatalog,
    scopes: Vec<Vec<ScopeItem>>,
    pub warnings: Vec<String>,
}

impl<'a> Resolver<'a> {
    pub fn new(catalog: &'a DatabaseCatalog) -> Self {
        Self {
            catalog,
            scopes: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn query(&mut self, q: &mut Query) -> Result<(), SqlError> {
        let Query { body, order_by, .. } = q;
        match body {
            SetExpr::Select(sel) => self.select(sel, Some(order_by)),
            SetExpr::Compound { .. } => {
                self.set_expr(body)?;
                if order_by.is_empty() {
                    return Ok(());
                }
                // Compound ORDER BY terms are looked up against the leftmost block.
                let first = first_select_mut(body);
                let scope = self.scope_for(first)?;
                self.scopes.push(scope);
                let aliases = select_aliases(first);
                let res = order_by
                    .iter_mut()
                    .try_for_each(|o| self.expr(&mut o.expr, AliasMode::Prefer, &aliases));
                self.scopes.pop();
                res
            }
        }
    }

    fn set_expr(&mut self, body: &mut SetExpr) -> Result<(), SqlError> {
        match body {
            SetExpr::Select(sel) => self.select(sel, None),
            SetExpr::Compound { left, right, .. } => {
                self.set_expr(left)?;
                self.set_expr(right)
            }
        }
    }

    fn select(&mut self, sel: &mut Select, order_by: Option<&mut Vec<OrderItem>>) -> Result<(), SqlError> {
        for item in &mut sel.from {
            match &mut item.source {
                FromSource::Table(name) => {
                    let table = self
                        .catalog
                        .table(name)
                        .ok_or_else(|| SqlError::resolve(name.clone(), "unknown table"))?;
                    *name = table.name.normal.clone();
                }
                FromSource::Derived(q) => {
                    if item.alias.is_none() {
                        self.warnings.push("derived table without alias".into());
                    }
                    self.query(q)?;
                }
            }
        }
        let scope = self.scope_for(sel)?;
        self.scopes.push(scope);
        let res = self.select_body(sel, order_by);
        self.scopes.pop();
        res
    }

    fn select_body(&mut self, sel: &mut Select, order_by: Option<&mut Vec<OrderItem>>) -> Result<(), SqlError> {
        for join in &mut sel.joins {
            self.column(&mut join.left)?;
            self.column(&mut join.right)?;
        }
        for item in &mut sel.items {
            self.expr(&mut item.expr, AliasMode::Off, &[])?;
        }
        if let Some(w) = &mut sel.where_clause {
            self.cond(w, AliasMode::Off, &[])?;
        }
        let aliases = select_aliases(sel);
        for g in &mut sel.group_by {
            self.expr(g, AliasMode::Fallback, &aliases)?;
        }
        if let Some(h) = &mut sel.having {
            self.cond(h, AliasMode::Fallback, &aliases)?;
        }
        if let Some(order_by) = order_by {
            for o in order_by {
                self.expr(&mut o.expr, AliasMode::Prefer, &aliases)?;
            }
        }
        Ok(())
    }

    /// Scope entries for a SELECT whose FROM sources are already resolved.
    fn scope_for(&self, sel: &Select) -> Result<Vec<ScopeItem>, SqlError> {
        sel.from
            .iter()
            .map(|item| {
                let alias = item.alias.as_deref().map(normalize);
                let kind = match &item.source {
                    FromSource::Table(t) => ItemKind::Table(t.clone()),
                    FromSource::Derived(q) => ItemKind::Derived(self.derived_columns(q)),
                };
                Ok(ScopeItem { alias, kind })
            })
            .collect()
    }

    fn derived_columns(&self, q: &Query) -> Vec<DerivedColumn> {
        let sel = q.first_select();
        let mut out = Vec::new();
        let catalog_columns = |table: &str, out: &mut Vec<DerivedColumn>| {
            if let Some(t) = self.catalog.table(table) {
                out.extend(t.columns.iter().map(|c| DerivedColumn {
                    name: c.name.normal.clone(),
                    origin: Some((t.name.normal.clone(), c.name.normal.clone())),
                }));
            }
        };
        for item in &sel.items {
            match &item.expr {
                Expr::Star(None) => {
                    for f in &sel.from {
                        if let FromSource::Table(t) = &f.source {
                            catalog_columns(t, &mut out);
                        }
                    }
                }
                Expr::Star(Some(s)) => catalog_columns(&s.table, &mut out),
                Expr::Column(c) => out.push(DerivedColumn {
                    name: item
                        .alias
                        .as_deref()
                        .map(normalize)
                        .or_else(|| c.via.clone())
                        .unwrap_or_else(|| c.column.clone()),
                    origin: Some((c.table.clone(), c.column.clone())),
                }),
                _ => out.push(DerivedColumn {
                    name: item.alias.as_deref().map(normalize).unwrap_or_default(),
                    origin: None,
                }),
            }
        }
        out
    }

    fn lookup_qualifier(&self, qualifier: &str) -> Option<(u32, u32, &ScopeItem)> {
        for (up, scope) in self.scopes.iter().rev().enumerate() {
            let by_alias = scope.iter().position(|i| i.alias.as_deref() == Some(qualifier));
            let found = by_alias
                .or_else(|| {
                    scope
                        .iter()
                        .position(|i| i.alias.is_none() && i.table_name() == Some(qualifier))
                })
                .or_else(|| scope.iter().position(|i| i.table_name() == Some(qualifier)));
            if let Some(idx) = found {
                return Some((up as u32, idx as u32, &scope[idx]));
            }
        }
        None
    }

    fn column(&mut self, c: &mut ColumnRef) -> Result<(), SqlError> {
        let qualifier = normalize(&c.table);
        let col = normalize(&c.column);
        let (up, idx) = if qualifier.is_empty() {
            self.lookup_unqualified(&col)?
        } else {
            let (up, idx, item) = self
                .lookup_qualifier(&qualifier)
                .ok_or_else(|| SqlError::resolve(format!("{}.{}", c.table, c.column), "unknown table or alias"))?;
            if !item.has_column(self.catalog, &col) {
                return Err(SqlError::resolve(
                    format!("{}.{}", c.table, c.column),
                    "no such column in the referenced table",
                ));
            }
            (up, idx)
        };
        let item = &self.scopes[self.scopes.len() - 1 - up as usize][idx as usize];
        let binding = Binding { up, item: idx };
        match &item.kind {
            ItemKind::Table(t) => {
                *c = ColumnRef {
                    table: t.clone(),
                    column: col,
                    binding,
                    via: None,
                };
            }
            ItemKind::Derived(cols) => {
                let dc = cols.iter().find(|d| d.name == col).expect("checked by has_column");
                let Some((table, column)) = dc.origin.clone() else {
                    return Err(SqlError::resolve(
                        c.column.clone(),
                        "derived-table column is not a plain catalog column",
                    ));
                };
                *c = ColumnRef {
                    table,
                    column,
                    binding,
                    via: Some(col),
                };
            }
        }
        Ok(())
    }

    fn lookup_unqualified(&mut self, col: &str) -> Result<(u32, u32), SqlError> {
        let mut hit = None;
        for (up, scope) in self.scopes.iter().rev().enumerate() {
            let mut matches = scope
                .iter()
                .enumerate()
                .filter(|(_, i)| i.has_column(self.catalog, col));
            if let Some((idx, _)) = matches.next() {
                let extra = matches.count();
                hit = Some((up, idx, extra));
                break;
            }
        }
        let Some((up, idx, extra)) = hit else {
            return Err(SqlError::resolve(col, "column not found in any table in scope"));
        };
        if extra > 0 {
            self.warnings.push(format!(
                "ambiguous column `{col}` matches {} tables; using the first in FROM order",
                extra + 1
            ));
        }
        Ok((up as u32, idx as u32))
    }

    fn expr(&mut self, e: &mut Expr, mode: AliasMode, aliases: &[(String, Expr)]) -> Result<(), SqlError> {
        match e {
            Expr::Column(c) => {
                let alias_hit = || {
                    if !c.table.is_empty() {
                        return None;
                    }
                    let n = normalize(&c.column);
                    aliases.iter().find(|(a, _)| *a == n).map(|(_, x)| x.clone())
                };
                match mode {
                    AliasMode::Prefer => {
                        if let Some(x) = alias_hit() {
                            *e = x;
                            return Ok(());
                        }
                        self.column(c)
                    }
                    AliasMode::Fallback => {
                        let mut probe = c.clone();
                        match self.column(&mut probe) {
                            Ok(()) => {
                                *c = probe;
                                Ok(())
                            }
                            Err(err) => match alias_hit() {
                                Some(x) => {
                                    *e = x;
                                    Ok(())
                                }
                                None => Err(err),
                            },
                        }
                    }
                    AliasMode::Off => self.column(c),
                }
            }
            Expr::Star(Some(s)) => {
                let qualifier = normalize(&s.table);
                let (up, idx, item) = self
                    .lookup_qualifier(&qualifier)
                    .ok_or_else(|| SqlError::resolve(format!("{}.*", s.table), "unknown table or alias"))?;
                let Some(table) = item.table_name() else {
                    return Err(SqlError::resolve(
                        format!("{}.*", s.table),
                        "qualified star over a derived table",
                    ));
                };
                *s = StarScope {
                    table: table.into(),
                    binding: Binding { up, item: idx },
                };
                Ok(())
            }
            Expr::Star(None) | Expr::Literal(_) => Ok(()),
            Expr::Aggregate { arg, .. } => self.expr(arg, mode, aliases),
            Expr::Arith { lhs, rhs, .. } => {
                self.expr(lhs, mode, aliases)?;
                self.expr(rhs, mode, aliases)
            }
            Expr::Neg(inner) => self.expr(inner, mode, aliases),
            Expr::Subquery(q) => self.query(q),
        }
    }

    fn cond(&mut self, c: &mut Cond, mode: AliasMode, aliases: &[(String, Expr)]) -> Result<(), SqlError> {
        match c {
            Cond::And(parts) | Cond::Or(parts) => parts.iter_mut().try_for_each(|p| self.cond(p, mode, aliases)),
            Cond::Not(inner) => self.cond(inner, mode, aliases),
            Cond::Compare { lhs, rhs, .. } => {
                self.expr(lhs, mode, aliases)?;
                self.expr(rhs, mode, aliases)
            }
            Cond::Between { expr, low, high, .. } => {
                self.expr(expr, mode, aliases)?;
                self.expr(low, mode, aliases)?;
                self.expr(high, mode, aliases)
            }
            Cond::In { expr, set, .. } => {
                self.expr(expr, mode, aliases)?;
                match set {
                    InSet::Query(q) => self.query(q),
                    InSet::List(items) => items.iter_mut().try_for_each(|i| self.expr(i, mode, aliases)),
                }
            }
            Cond::Like { expr, pattern, .. } => {
                self.expr(expr, mode, aliases)?;
                self.expr(pattern, mode, aliases)
            }
            Cond::Exists { query, .. } => self.query(query),
            Cond::IsNull { expr, .. } => self.expr(expr, mode, aliases),
        }
    }
}

fn first_select_mut(body: &mut SetExpr) -> &mut Select {
    match body {
        SetExpr::Select(s) => s,
        SetExpr::Compound { left, .. } => first_select_mut(left),
    }
}

fn select_aliases(sel: &Select) -> Vec<(String, Expr)> {
    sel.items
        .iter()
        .filter_map(|i| i.alias.as_deref().map(|a| (normalize(a), i.expr.clone())))
        .collect()
}
