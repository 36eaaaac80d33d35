//! Clause-decomposed query tree.
//!
//! The parser produces this tree with names as written; the resolver then
//! rewrites every column reference in place to catalog normal names and a
//! [`Binding`] to the FROM item it reads from. After resolution, table
//! names in [`FromSource::Table`] are normal names as well.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Query {
    pub body: SetExpr,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SetExpr {
    Select(Box<Select>),
    Compound {
        op: SetOp,
        left: Box<SetExpr>,
        right: Box<SetExpr>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SetOp {
    Union,
    Intersect,
    Except,
}

impl SetOp {
    pub fn keyword(self) -> &'static str {
        match self {
            Self::Union => "UNION",
            Self::Intersect => "INTERSECT",
            Self::Except => "EXCEPT",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: Vec<FromItem>,
    pub joins: Vec<JoinCondition>,
    pub where_clause: Option<Cond>,
    pub group_by: Vec<Expr>,
    pub having: Option<Cond>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FromItem {
    pub source: FromSource,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FromSource {
    Table(String),
    Derived(Box<Query>),
}

/// Equality between two columns from a JOIN ... ON clause.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JoinCondition {
    pub left: ColumnRef,
    pub right: ColumnRef,
}

/// Which FROM item a reference reads from: `up` enclosing SELECT scopes out,
/// position `item` in that scope's FROM list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Binding {
    pub up: u32,
    pub item: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnRef {
    /// Catalog table. Before resolution: the qualifier as written, or empty.
    pub table: String,
    /// Catalog column. Before resolution: the name as written.
    pub column: String,
    pub binding: Binding,
    /// Output column name when the reference reads through a derived table.
    pub via: Option<String>,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self {
            table: table.into(),
            column: column.into(),
            binding: Binding::default(),
            via: None,
        }
    }
}

/// Target of a qualified `alias.*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StarScope {
    pub table: String,
    pub binding: Binding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "count" => Self::Count,
            "sum" => Self::Sum,
            "avg" => Self::Avg,
            "min" => Self::Min,
            "max" => Self::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Count => "count",
            Self::Sum => "sum",
            Self::Avg => "avg",
            Self::Min => "min",
            Self::Max => "max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Add => "+",
            Self::Sub => "-",
            Self::Mul => "*",
            Self::Div => "/",
            Self::Mod => "%",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            Self::Add | Self::Sub => 1,
            Self::Mul | Self::Div | Self::Mod => 2,
        }
    }
}

/// Literal values. Numbers hold canonical decimal text (see
/// [`canonical_number`]); strings hold their content with quotes stripped.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Literal {
    Number(String),
    Str(String),
    Null,
    /// Stands in for any value when literals are abstracted away.
    Placeholder,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Column(ColumnRef),
    /// `*` or `alias.*`.
    Star(Option<StarScope>),
    Literal(Literal),
    Aggregate {
        func: AggFunc,
        distinct: bool,
        arg: Box<Expr>,
    },
    Arith {
        op: ArithOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Neg(Box<Expr>),
    Subquery(Box<Query>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Eq => "=",
            Self::Ne => "!=",
            Self::Lt => "<",
            Self::Le => "<=",
            Self::Gt => ">",
            Self::Ge => ">=",
        }
    }
}

/// Boolean expression tree of a WHERE or HAVING clause.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cond {
    And(Vec<Cond>),
    Or(Vec<Cond>),
    Not(Box<Cond>),
    Compare {
        op: CmpOp,
        lhs: Expr,
        rhs: Expr,
    },
    Between {
        negated: bool,
        expr: Expr,
        low: Expr,
        high: Expr,
    },
    In {
        negated: bool,
        expr: Expr,
        set: InSet,
    },
    Like {
        negated: bool,
        expr: Expr,
        pattern: Expr,
    },
    Exists {
        negated: bool,
        query: Box<Query>,
    },
    IsNull {
        negated: bool,
        expr: Expr,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InSet {
    Query(Box<Query>),
    List(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrderItem {
    pub expr: Expr,
    pub desc: bool,
}

/// Canonical decimal text for a numeric literal.
///
/// Integers lose leading zeros and keep their sign; anything with a fraction
/// or exponent is printed in shortest round-trip form and always carries a
/// decimal point or exponent, so integer and real literals never collide.
pub fn canonical_number(text: &str) -> String {
    let (neg, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let mut out = String::new();
    if digits.bytes().all(|b| b.is_ascii_digit()) && !digits.is_empty() {
        let trimmed = digits.trim_start_matches('0');
        let trimmed = if trimmed.is_empty() { "0" } else { trimmed };
        if neg && trimmed != "0" {
            out.push('-');
        }
        out.push_str(trimmed);
        return out;
    }
    match digits.parse::<f64>() {
        Ok(v) => {
            let v = if neg { -v } else { v };
            // Debug keeps the trailing `.0` on integral reals.
            let _ = core::fmt::Write::write_fmt(&mut out, format_args!("{v:?}"));
            if out == "-0.0" {
                out = "0.0".into();
            }
            out
        }
        Err(_) => text.into(),
    }
}

impl Query {
    /// Every SELECT block of the (possibly compound) body, left to right.
    pub fn selects(&self) -> Vec<&Select> {
        let mut out = Vec::new();
        self.body.collect_selects(&mut out);
        out
    }

    /// Leftmost SELECT block.
    pub fn first_select(&self) -> &Select {
        self.body.first_select()
    }

    /// Catalog tables in the FROM clauses of this query's own SELECT blocks.
    pub fn from_tables(&self) -> BTreeSet<String> {
        self.selects()
            .into_iter()
            .flat_map(|s| s.from.iter())
            .filter_map(|f| match &f.source {
                FromSource::Table(t) => Some(t.clone()),
                FromSource::Derived(_) => None,
            })
            .collect()
    }

    pub fn set_op(&self) -> Option<SetOp> {
        match &self.body {
            SetExpr::Compound { op, .. } => Some(*op),
            SetExpr::Select(_) => None,
        }
    }
}

impl SetExpr {
    fn collect_selects<'a>(&'a self, out: &mut Vec<&'a Select>) {
        match self {
            SetExpr::Select(s) => out.push(s),
            SetExpr::Compound { left, right, .. } => {
                left.collect_selects(out);
                right.collect_selects(out);
            }
        }
    }

    pub fn first_select(&self) -> &Select {
        match self {
            SetExpr::Select(s) => s,
            SetExpr::Compound { left, .. } => left.first_select(),
        }
    }
}
