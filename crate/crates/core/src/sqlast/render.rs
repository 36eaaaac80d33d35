//! Pretty-printer for resolved queries.
//!
//! Every FROM item gets a fresh alias `T1`, `T2`, ... and every column is
//! printed qualified by the alias of the item it is bound to, so the output
//! re-resolves to the same tree shape.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::ast::*;

pub fn render(q: &Query) -> String {
    let mut r = Renderer::default();
    r.query(q);
    r.out
}

#[derive(Default)]
struct Renderer {
    out: String,
    frames: Vec<Vec<String>>,
    counter: u32,
}

pub(crate) fn quote_ident(name: &str) -> String {
    let simple = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    let reserved = [
        "select",
        "from",
        "where",
        "group",
        "by",
        "having",
        "order",
        "limit",
        "union",
        "intersect",
        "except",
        "join",
        "inner",
        "left",
        "right",
        "outer",
        "cross",
        "natural",
        "full",
        "on",
        "using",
        "as",
        "and",
        "or",
        "not",
        "in",
        "like",
        "between",
        "exists",
        "is",
        "null",
        "distinct",
        "asc",
        "desc",
        "all",
        "case",
        "when",
        "then",
        "else",
        "end",
        "offset",
        "count",
        "sum",
        "avg",
        "min",
        "max",
    ];
    if simple && !reserved.iter().any(|r| r.eq_ignore_ascii_case(name)) {
        name.into()
    } else {
        format!("`{}`", name.replace('`', "``"))
    }
}

impl Renderer {
    fn query(&mut self, q: &Query) {
        match &q.body {
            SetExpr::Select(s) => {
                self.select(s, Some((&q.order_by, q.limit)));
            }
            SetExpr::Compound { .. } => {
                let first = self.set_expr(&q.body);
                self.frames.push(first);
                self.tail(&q.order_by, q.limit);
                self.frames.pop();
            }
        }
    }

    /// Renders a compound body and returns the alias frame of its leftmost block.
    fn set_expr(&mut self, body: &SetExpr) -> Vec<String> {
        match body {
            SetExpr::Select(s) => self.select(s, None),
            SetExpr::Compound { op, left, right } => {
                let frame = self.set_expr(left);
                let _ = write!(self.out, " {} ", op.keyword());
                self.set_expr(right);
                frame
            }
        }
    }

    fn select(&mut self, s: &Select, tail: Option<(&[OrderItem], Option<u64>)>) -> Vec<String> {
        let frame: Vec<String> = s
            .from
            .iter()
            .map(|_| {
                self.counter += 1;
                format!("T{}", self.counter)
            })
            .collect();
        self.out.push_str("SELECT ");
        if s.distinct {
            self.out.push_str("DISTINCT ");
        }
        self.frames.push(frame.clone());
        for (i, item) in s.items.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.expr(&item.expr);
            if let Some(a) = &item.alias {
                let _ = write!(self.out, " AS {}", quote_ident(a));
            }
        }
        if !s.from.is_empty() {
            self.out.push_str(" FROM ");
            // Derived tables cannot see their siblings.
            let own = self.frames.pop().expect("frame pushed above");
            for (i, item) in s.from.iter().enumerate() {
                if i > 0 {
                    self.out.push_str(" JOIN ");
                }
                match &item.source {
                    FromSource::Table(t) => self.out.push_str(&quote_ident(t)),
                    FromSource::Derived(q) => {
                        self.out.push('(');
                        self.query(q);
                        self.out.push(')');
                    }
                }
                let _ = write!(self.out, " AS {}", own[i]);
            }
            self.frames.push(own);
            for (i, j) in s.joins.iter().enumerate() {
                self.out.push_str(if i == 0 { " ON " } else { " AND " });
                self.column(&j.left);
                self.out.push_str(" = ");
                self.column(&j.right);
            }
        }
        if let Some(w) = &s.where_clause {
            self.out.push_str(" WHERE ");
            self.cond(w);
        }
        if !s.group_by.is_empty() {
            self.out.push_str(" GROUP BY ");
            for (i, g) in s.group_by.iter().enumerate() {
                if i > 0 {
                    self.out.push_str(", ");
                }
                self.expr(g);
            }
        }
        if let Some(h) = &s.having {
            self.out.push_str(" HAVING ");
            self.cond(h);
        }
        if let Some((order_by, limit)) = tail {
            self.tail(order_by, limit);
        }
        self.frames.pop();
        frame
    }

    fn tail(&mut self, order_by: &[OrderItem], limit: Option<u64>) {
        if !order_by.is_empty() {
            self.out.push_str(" ORDER BY ");
            for (i, o) in order_by.iter().enumerate() {
                if i > 0 {
                    self.out.push_str(", ");
                }
                self.expr(&o.expr);
                self.out.push_str(if o.desc { " DESC" } else { " ASC" });
            }
        }
        if let Some(n) = limit {
            let _ = write!(self.out, " LIMIT {n}");
        }
    }

    fn alias_of(&self, b: Binding) -> &str {
        let depth = self.frames.len() - 1 - b.up as usize;
        &self.frames[depth][b.item as usize]
    }

    fn column(&mut self, c: &ColumnRef) {
        let alias = self.alias_of(c.binding).to_owned();
        let name = c.via.as_deref().unwrap_or(&c.column);
        let _ = write!(self.out, "{alias}.{}", quote_ident(name));
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Column(c) => self.column(c),
            Expr::Star(None) => self.out.push('*'),
            Expr::Star(Some(s)) => {
                let alias = self.alias_of(s.binding).to_owned();
                let _ = write!(self.out, "{alias}.*");
            }
            Expr::Literal(l) => self.literal(l),
            Expr::Aggregate { func, distinct, arg } => {
                let _ = write!(self.out, "{}(", func.name());
                if *distinct {
                    self.out.push_str("DISTINCT ");
                }
                self.expr(arg);
                self.out.push(')');
            }
            Expr::Arith { op, lhs, rhs } => {
                let wrap = |child: &Expr, strict: bool| match child {
                    Expr::Arith { op: c, .. } => {
                        if strict {
                            c.precedence() <= op.precedence()
                        } else {
                            c.precedence() < op.precedence()
                        }
                    }
                    _ => false,
                };
                self.sub_expr(lhs, wrap(lhs, false));
                let _ = write!(self.out, " {} ", op.symbol());
                self.sub_expr(rhs, wrap(rhs, true));
            }
            Expr::Neg(inner) => {
                self.out.push_str("-(");
                self.expr(inner);
                self.out.push(')');
            }
            Expr::Subquery(q) => {
                self.out.push('(');
                self.query(q);
                self.out.push(')');
            }
        }
    }

    fn sub_expr(&mut self, e: &Expr, parens: bool) {
        if parens {
            self.out.push('(');
        }
        self.expr(e);
        if parens {
            self.out.push(')');
        }
    }

    fn literal(&mut self, l: &Literal) {
        match l {
            Literal::Number(n) => self.out.push_str(n),
            Literal::Str(s) => {
                let _ = write!(self.out, "'{}'", s.replace('\'', "''"));
            }
            Literal::Null => self.out.push_str("NULL"),
            Literal::Placeholder => self.out.push('?'),
        }
    }

    fn cond(&mut self, c: &Cond) {
        match c {
            Cond::And(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(" AND ");
                    }
                    let group = matches!(p, Cond::Or(_) | Cond::And(_));
                    self.grouped(p, group);
                }
            }
            Cond::Or(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(" OR ");
                    }
                    self.grouped(p, matches!(p, Cond::Or(_)));
                }
            }
            Cond::Not(inner) => {
                self.out.push_str("NOT ");
                self.grouped(inner, true);
            }
            Cond::Compare { op, lhs, rhs } => {
                self.expr(lhs);
                let _ = write!(self.out, " {} ", op.symbol());
                self.expr(rhs);
            }
            Cond::Between {
                negated,
                expr,
                low,
                high,
            } => {
                self.expr(expr);
                self.out.push_str(if *negated { " NOT BETWEEN " } else { " BETWEEN " });
                self.expr(low);
                self.out.push_str(" AND ");
                self.expr(high);
            }
            Cond::In { negated, expr, set } => {
                self.expr(expr);
                self.out.push_str(if *negated { " NOT IN (" } else { " IN (" });
                match set {
                    InSet::Query(q) => self.query(q),
                    InSet::List(items) => {
                        for (i, item) in items.iter().enumerate() {
                            if i > 0 {
                                self.out.push_str(", ");
                            }
                            self.expr(item);
                        }
                    }
                }
                self.out.push(')');
            }
            Cond::Like { negated, expr, pattern } => {
                self.expr(expr);
                self.out.push_str(if *negated { " NOT LIKE " } else { " LIKE " });
                self.expr(pattern);
            }
            Cond::Exists { negated, query } => {
                self.out.push_str(if *negated { "NOT EXISTS (" } else { "EXISTS (" });
                self.query(query);
                self.out.push(')');
            }
            Cond::IsNull { negated, expr } => {
                self.expr(expr);
                self.out.push_str(if *negated { " IS NOT NULL" } else { " IS NULL" });
            }
        }
    }

    fn grouped(&mut self, c: &Cond, parens: bool) {
        if parens {
            self.out.push('(');
        }
        self.cond(c);
        if parens {
            self.out.push(')');
        }
    }
}
