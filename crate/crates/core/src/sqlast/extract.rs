use super::ast::*;
use crate::link::LinkTarget;

/// Collects every catalog table and column the query touches, including
/// nested subqueries, derived tables and compound operands. `*` contributes
/// its tables but no columns.
pub fn extract_link_targets(q: &Query) -> LinkTarget {
    let mut out = LinkTarget::default();
    query(q, &mut out);
    out
}

fn query(q: &Query, out: &mut LinkTarget) {
    set_expr(&q.body, out);
    for o in &q.order_by {
        expr(&o.expr, out);
    }
}

fn set_expr(body: &SetExpr, out: &mut LinkTarget) {
    match body {
        SetExpr::Select(s) => select(s, out),
        SetExpr::Compound { left, right, .. } => {
            set_expr(left, out);
            set_expr(right, out);
        }
    }
}

fn select(s: &Select, out: &mut LinkTarget) {
    for f in &s.from {
        match &f.source {
            FromSource::Table(t) => {
                out.tables.insert(t.clone());
            }
            FromSource::Derived(q) => query(q, out),
        }
    }
    for j in &s.joins {
        column(&j.left, out);
        column(&j.right, out);
    }
    for i in &s.items {
        expr(&i.expr, out);
    }
    if let Some(w) = &s.where_clause {
        cond(w, out);
    }
    for g in &s.group_by {
        expr(g, out);
    }
    if let Some(h) = &s.having {
        cond(h, out);
    }
}

fn column(c: &ColumnRef, out: &mut LinkTarget) {
    out.tables.insert(c.table.clone());
    out.columns.insert((c.table.clone(), c.column.clone()));
}

fn expr(e: &Expr, out: &mut LinkTarget) {
    match e {
        Expr::Column(c) => column(c, out),
        Expr::Star(Some(s)) => {
            out.tables.insert(s.table.clone());
        }
        Expr::Star(None) | Expr::Literal(_) => {}
        Expr::Aggregate { arg, .. } => expr(arg, out),
        Expr::Arith { lhs, rhs, .. } => {
            expr(lhs, out);
            expr(rhs, out);
        }
        Expr::Neg(inner) => expr(inner, out),
        Expr::Subquery(q) => query(q, out),
    }
}

fn cond(c: &Cond, out: &mut LinkTarget) {
    match c {
        Cond::And(parts) | Cond::Or(parts) => parts.iter().for_each(|p| cond(p, out)),
        Cond::Not(inner) => cond(inner, out),
        Cond::Compare { lhs, rhs, .. } => {
            expr(lhs, out);
            expr(rhs, out);
        }
        Cond::Between { expr: e, low, high, .. } => {
            expr(e, out);
            expr(low, out);
            expr(high, out);
        }
        Cond::In { expr: e, set, .. } => {
            expr(e, out);
            match set {
                InSet::Query(q) => query(q, out),
                InSet::List(items) => items.iter().for_each(|i| expr(i, out)),
            }
        }
        Cond::Like { expr: e, pattern, .. } => {
            expr(e, out);
            expr(pattern, out);
        }
        Cond::Exists { query: q, .. } => query(q, out),
        Cond::IsNull { expr: e, .. } => expr(e, out),
    }
}
