//! Clause decomposition in commutative normal form.
//!
//! Two queries have equal [`Components`] when they differ only in positions
//! that cannot change the result: select-list order (outside compound
//! operands), FROM order, join-pair orientation and order, AND/OR operand
//! order, GROUP BY order, IN-list order, and UNION/INTERSECT operand order.
//! Aliases and FROM positions are erased; ORDER BY stays order- and
//! direction-sensitive, EXCEPT operands stay ordered.

use alloc::boxed::Box;
use alloc::vec::Vec;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Components {
    pub body: BodyComponents,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BodyComponents {
    Select(SelectComponents),
    Compound { op: SetOp, operands: Vec<BodyComponents> },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SelectComponents {
    pub distinct: bool,
    /// Sorted, except inside compound operands where column order matters.
    pub select: Vec<Expr>,
    pub from: Vec<FromSource>,
    pub joins: Vec<(ColumnRef, ColumnRef)>,
    pub where_clause: Option<Cond>,
    pub group_by: Vec<Expr>,
    pub having: Option<Cond>,
}

pub fn clause_components(q: &Query) -> Components {
    clause_components_with(q, false)
}

/// With `ignore_values`, every literal becomes [`Literal::Placeholder`].
pub fn clause_components_with(q: &Query, ignore_values: bool) -> Components {
    let norm = Normalizer { ignore_values };
    let q = norm.query(q);
    Components {
        body: body_components(q.body),
        order_by: q.order_by,
        limit: q.limit,
    }
}

/// The canonical query tree that [`Components`] is read from.
pub fn normalize_query(q: &Query, ignore_values: bool) -> Query {
    Normalizer { ignore_values }.query(q)
}

fn body_components(body: SetExpr) -> BodyComponents {
    match body {
        SetExpr::Select(s) => {
            let s = *s;
            BodyComponents::Select(SelectComponents {
                distinct: s.distinct,
                select: s.items.into_iter().map(|i| i.expr).collect(),
                from: s.from.into_iter().map(|f| f.source).collect(),
                joins: s.joins.into_iter().map(|j| (j.left, j.right)).collect(),
                where_clause: s.where_clause,
                group_by: s.group_by,
                having: s.having,
            })
        }
        SetExpr::Compound { op, left, right } => BodyComponents::Compound {
            op,
            operands: alloc::vec![body_components(*left), body_components(*right)],
        },
    }
}

struct Normalizer {
    ignore_values: bool,
}

impl Normalizer {
    fn query(&self, q: &Query) -> Query {
        Query {
            body: self.set_expr(&q.body, false),
            order_by: q
                .order_by
                .iter()
                .map(|o| OrderItem {
                    expr: self.expr(&o.expr),
                    desc: o.desc,
                })
                .collect(),
            limit: q.limit,
        }
    }

    fn set_expr(&self, body: &SetExpr, in_compound: bool) -> SetExpr {
        match body {
            SetExpr::Select(s) => SetExpr::Select(Box::new(self.select(s, in_compound))),
            SetExpr::Compound { op, left, right } => {
                let mut l = self.set_expr(left, true);
                let mut r = self.set_expr(right, true);
                if *op != SetOp::Except && r < l {
                    core::mem::swap(&mut l, &mut r);
                }
                SetExpr::Compound {
                    op: *op,
                    left: Box::new(l),
                    right: Box::new(r),
                }
            }
        }
    }

    fn select(&self, s: &Select, in_compound: bool) -> Select {
        let mut items: Vec<SelectItem> = s
            .items
            .iter()
            .map(|i| SelectItem {
                expr: self.expr(&i.expr),
                alias: None,
            })
            .collect();
        if !in_compound {
            items.sort();
        }
        let mut from: Vec<FromItem> = s
            .from
            .iter()
            .map(|f| FromItem {
                source: match &f.source {
                    FromSource::Table(t) => FromSource::Table(t.clone()),
                    FromSource::Derived(q) => FromSource::Derived(Box::new(self.query(q))),
                },
                alias: None,
            })
            .collect();
        from.sort();
        let mut joins: Vec<JoinCondition> = s
            .joins
            .iter()
            .map(|j| {
                let (a, b) = (column(&j.left), column(&j.right));
                let (left, right) = if b < a { (b, a) } else { (a, b) };
                JoinCondition { left, right }
            })
            .collect();
        joins.sort();
        let mut group_by: Vec<Expr> = s.group_by.iter().map(|g| self.expr(g)).collect();
        group_by.sort();
        Select {
            distinct: s.distinct,
            items,
            from,
            joins,
            where_clause: s.where_clause.as_ref().map(|c| self.cond(c)),
            group_by,
            having: s.having.as_ref().map(|c| self.cond(c)),
        }
    }

    fn expr(&self, e: &Expr) -> Expr {
        match e {
            Expr::Column(c) => Expr::Column(column(c)),
            Expr::Star(s) => Expr::Star(s.as_ref().map(|s| StarScope {
                table: s.table.clone(),
                binding: Binding {
                    up: s.binding.up,
                    item: 0,
                },
            })),
            Expr::Literal(l) => Expr::Literal(if self.ignore_values {
                Literal::Placeholder
            } else {
                l.clone()
            }),
            Expr::Aggregate { func, distinct, arg } => Expr::Aggregate {
                func: *func,
                distinct: *distinct,
                arg: Box::new(self.expr(arg)),
            },
            Expr::Arith { op, lhs, rhs } => Expr::Arith {
                op: *op,
                lhs: Box::new(self.expr(lhs)),
                rhs: Box::new(self.expr(rhs)),
            },
            Expr::Neg(inner) => Expr::Neg(Box::new(self.expr(inner))),
            Expr::Subquery(q) => Expr::Subquery(Box::new(self.query(q))),
        }
    }

    fn cond(&self, c: &Cond) -> Cond {
        match c {
            Cond::And(parts) => self.flatten(parts, true),
            Cond::Or(parts) => self.flatten(parts, false),
            Cond::Not(inner) => Cond::Not(Box::new(self.cond(inner))),
            Cond::Compare { op, lhs, rhs } => Cond::Compare {
                op: *op,
                lhs: self.expr(lhs),
                rhs: self.expr(rhs),
            },
            Cond::Between {
                negated,
                expr,
                low,
                high,
            } => Cond::Between {
                negated: *negated,
                expr: self.expr(expr),
                low: self.expr(low),
                high: self.expr(high),
            },
            Cond::In { negated, expr, set } => Cond::In {
                negated: *negated,
                expr: self.expr(expr),
                set: match set {
                    InSet::Query(q) => InSet::Query(Box::new(self.query(q))),
                    InSet::List(items) => {
                        let mut items: Vec<Expr> = items.iter().map(|i| self.expr(i)).collect();
                        items.sort();
                        InSet::List(items)
                    }
                },
            },
            Cond::Like { negated, expr, pattern } => Cond::Like {
                negated: *negated,
                expr: self.expr(expr),
                pattern: self.expr(pattern),
            },
            Cond::Exists { negated, query } => Cond::Exists {
                negated: *negated,
                query: Box::new(self.query(query)),
            },
            Cond::IsNull { negated, expr } => Cond::IsNull {
                negated: *negated,
                expr: self.expr(expr),
            },
        }
    }

    /// Flattens nested AND (or OR) nodes and sorts their operands.
    fn flatten(&self, parts: &[Cond], and: bool) -> Cond {
        let mut out = Vec::new();
        for p in parts {
            match (self.cond(p), and) {
                (Cond::And(inner), true) | (Cond::Or(inner), false) => out.extend(inner),
                (other, _) => out.push(other),
            }
        }
        out.sort();
        match (out.len(), and) {
            (1, _) => out.pop().expect("one element"),
            (_, true) => Cond::And(out),
            (_, false) => Cond::Or(out),
        }
    }
}

fn column(c: &ColumnRef) -> ColumnRef {
    ColumnRef {
        table: c.table.clone(),
        column: c.column.clone(),
        binding: Binding {
            up: c.binding.up,
            item: 0,
        },
        via: None,
    }
}
