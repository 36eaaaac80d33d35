//! Query pairs labeled at construction: `Safe` pairs differ only in
//! commutative positions, `Unsafe` pairs differ in one clause component.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::fixtures::{FixtureDb, Value};
use crate::querygen::{Body, GenQuery, GenSelect, GeneratedQuery, Pred, Scalar, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    Safe,
    Unsafe,
}

#[derive(Debug, Clone)]
pub struct QueryPair {
    pub db_id: String,
    pub left: String,
    pub right: String,
    pub label: PairLabel,
    /// What the unsafe side changed.
    pub mutation: Option<&'static str>,
}

pub fn safe_pair(q: &GeneratedQuery, rng: &mut ChaCha8Rng) -> QueryPair {
    QueryPair {
        db_id: q.db_id.clone(),
        left: q.sql.clone(),
        right: q.tree.permuted_sql(rng),
        label: PairLabel::Safe,
        mutation: None,
    }
}

/// One component-changing edit, printed with shuffled commutative positions.
pub fn unsafe_pair(q: &GeneratedQuery, db: &FixtureDb, rng: &mut ChaCha8Rng) -> QueryPair {
    let (tree, mutation) = mutate(&q.tree, db, rng);
    QueryPair {
        db_id: q.db_id.clone(),
        left: q.sql.clone(),
        right: tree.permuted_sql(rng),
        label: PairLabel::Unsafe,
        mutation: Some(mutation),
    }
}

const MUTATIONS: [&str; 7] = [
    "flip_order_direction",
    "change_limit",
    "swap_except_operands",
    "change_literal",
    "change_operator",
    "drop_conjunct",
    "replace_column",
];

pub fn mutate(q: &GenQuery, db: &FixtureDb, rng: &mut ChaCha8Rng) -> (GenQuery, &'static str) {
    let mut order = MUTATIONS;
    order.shuffle(rng);
    for m in order {
        let mut out = q.clone();
        if apply(&mut out, m, db) {
            return (out, m);
        }
    }
    // Always applicable.
    let mut out = q.clone();
    first_select(&mut out).distinct ^= true;
    (out, "toggle_distinct")
}

fn first_select(q: &mut GenQuery) -> &mut GenSelect {
    match &mut q.body {
        Body::Select(s) => s,
        Body::Compound { left, .. } => left,
    }
}

fn apply(q: &mut GenQuery, m: &str, db: &FixtureDb) -> bool {
    match m {
        "flip_order_direction" => match q.order_by.first_mut() {
            Some((_, desc)) => {
                *desc = !*desc;
                true
            }
            None => false,
        },
        "change_limit" => match &mut q.limit {
            Some(n) => {
                *n += 1;
                true
            }
            None => false,
        },
        "swap_except_operands" => match &mut q.body {
            Body::Compound {
                op: "EXCEPT",
                left,
                right,
            } if left != right => {
                std::mem::swap(left, right);
                true
            }
            _ => false,
        },
        "change_literal" => first_select(q).where_clause.as_mut().is_some_and(change_literal),
        "change_operator" => first_select(q).where_clause.as_mut().is_some_and(change_operator),
        "drop_conjunct" => match &mut first_select(q).where_clause {
            Some(Pred::And(parts)) if parts.len() >= 2 => {
                parts.pop();
                true
            }
            _ => false,
        },
        "replace_column" => replace_column(first_select(q), db),
        _ => false,
    }
}

fn bump(v: &mut Value) {
    *v = match v {
        Value::Int(i) => Value::Int(*i + 1),
        Value::Real(r) => Value::Real(*r + 1.0),
        Value::Text(s) => Value::Text(format!("{s}x")),
        Value::Null => Value::Int(0),
    };
}

fn change_literal(p: &mut Pred) -> bool {
    match p {
        Pred::Cmp {
            rhs: Scalar::Lit(v), ..
        } => {
            bump(v);
            true
        }
        Pred::Between { high, .. } => {
            bump(high);
            true
        }
        Pred::Like { pattern, .. } => {
            pattern.push('x');
            true
        }
        Pred::InList { items, .. } => {
            bump(&mut items[0]);
            true
        }
        Pred::And(ps) | Pred::Or(ps) => ps.iter_mut().any(change_literal),
        _ => false,
    }
}

fn change_operator(p: &mut Pred) -> bool {
    match p {
        Pred::Cmp { op, .. } => {
            *op = match *op {
                "=" => "!=",
                "!=" => "=",
                "<" => ">=",
                "<=" => ">",
                ">" => "<=",
                _ => "<",
            };
            true
        }
        Pred::Between { negated, .. }
        | Pred::Like { negated, .. }
        | Pred::InList { negated, .. }
        | Pred::InQuery { negated, .. }
        | Pred::IsNull { negated, .. } => {
            *negated = !*negated;
            true
        }
        Pred::And(ps) | Pred::Or(ps) => ps.iter_mut().any(change_operator),
    }
}

/// Swaps the first plain select column for another column of its table.
fn replace_column(s: &mut GenSelect, db: &FixtureDb) -> bool {
    for item in &mut s.items {
        let Scalar::Col(c) = item else { continue };
        let Source::Table(t) = &s.from[c.from] else { continue };
        let table = db.table(t).expect("fixture table");
        if let Some(other) = table.columns.iter().find(|col| col.name != c.column) {
            c.column = other.name.into();
            return true;
        }
    }
    false
}

/// Labeled pairs drawn from a corpus, alternating safe and unsafe.
pub fn labeled_pairs(corpus: &[GeneratedQuery], dbs: &[FixtureDb], n: usize, rng: &mut ChaCha8Rng) -> Vec<QueryPair> {
    (0..n)
        .map(|i| {
            let q = corpus.choose(rng).expect("nonempty corpus");
            if i % 2 == 0 {
                safe_pair(q, rng)
            } else {
                let db = dbs.iter().find(|d| d.db_id == q.db_id).expect("fixture db");
                unsafe_pair(q, db, rng)
            }
        })
        .collect()
}
