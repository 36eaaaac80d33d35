//! Random benchmark-style queries with construction-known table and column
//! usage.
//!
//! Queries are built as a small tree ([`GenQuery`]) over a fixture schema,
//! then printed. The tree is the ground truth: the tables and columns it
//! mentions are collected by walking it, never by reading the SQL text.
//!
//! Generated queries stay inside a few rules that keep execution results
//! well defined: joins only follow foreign keys from the first table
//! outward, so every row of the first table yields at most one joined row;
//! ORDER BY is always a total order on the result (primary keys, all
//! DISTINCT items, or all GROUP BY columns as the last keys); LIMIT only
//! follows ORDER BY; unqualified columns only appear in single-table blocks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splitlink_core::LinkTarget;

use crate::fixtures::{FixtureDb, FixtureTable, Kind, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ColRef {
    /// Index into the enclosing block's FROM list.
    pub from: usize,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Col(ColRef),
    Lit(Value),
    Star,
    Agg {
        func: &'static str,
        distinct: bool,
        arg: Box<Scalar>,
    },
    Arith {
        op: &'static str,
        lhs: Box<Scalar>,
        rhs: Box<Scalar>,
    },
    Sub(Box<GenQuery>),
    /// `expr AS alias`, only as a derived-table item.
    Aliased {
        expr: Box<Scalar>,
        alias: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pred {
    Cmp {
        op: &'static str,
        lhs: Scalar,
        rhs: Scalar,
    },
    Between {
        negated: bool,
        expr: Scalar,
        low: Value,
        high: Value,
    },
    Like {
        negated: bool,
        expr: Scalar,
        pattern: String,
    },
    InList {
        negated: bool,
        expr: Scalar,
        items: Vec<Value>,
    },
    InQuery {
        negated: bool,
        expr: Scalar,
        query: Box<GenQuery>,
    },
    IsNull {
        negated: bool,
        expr: Scalar,
    },
    And(Vec<Pred>),
    Or(Vec<Pred>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedColumn {
    pub alias: String,
    pub table: String,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Table(String),
    /// A single-table block whose items are plain columns, each aliased.
    Derived {
        query: Box<GenQuery>,
        columns: Vec<DerivedColumn>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSelect {
    pub distinct: bool,
    pub items: Vec<Scalar>,
    pub from: Vec<Source>,
    /// `joins[k]` links `from[k + 1]` to an earlier item.
    pub joins: Vec<(ColRef, ColRef)>,
    pub where_clause: Option<Pred>,
    pub group_by: Vec<ColRef>,
    pub having: Option<Pred>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Select(GenSelect),
    Compound {
        op: &'static str,
        left: Box<GenSelect>,
        right: Box<GenSelect>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenQuery {
    pub body: Body,
    pub order_by: Vec<(Scalar, bool)>,
    pub limit: Option<u64>,
}

impl GenQuery {
    fn select(s: GenSelect) -> Self {
        Self {
            body: Body::Select(s),
            order_by: Vec::new(),
            limit: None,
        }
    }

    /// Tables and columns mentioned anywhere in the tree, as normal names.
    pub fn ground_truth(&self) -> LinkTarget {
        let mut out = LinkTarget::default();
        truth_query(self, &mut out);
        out
    }

    /// The query text with every position in its written order.
    pub fn sql(&self) -> String {
        Printer::canonical().query(self)
    }

    /// The same query with every commutative position shuffled, join
    /// conditions flipped and aliases renamed.
    pub fn permuted_sql(&self, rng: &mut ChaCha8Rng) -> String {
        Printer::shuffled(rng).query(self)
    }

    pub fn has_top_level_order(&self) -> bool {
        !self.order_by.is_empty()
    }
}

fn truth_query(q: &GenQuery, out: &mut LinkTarget) {
    match &q.body {
        Body::Select(s) => {
            truth_select(s, out);
            for (e, _) in &q.order_by {
                truth_scalar(e, s, out);
            }
        }
        Body::Compound { left, right, .. } => {
            truth_select(left, out);
            truth_select(right, out);
        }
    }
}

fn truth_select(s: &GenSelect, out: &mut LinkTarget) {
    for src in &s.from {
        match src {
            Source::Table(t) => {
                out.tables.insert(t.to_lowercase());
            }
            Source::Derived { query, .. } => truth_query(query, out),
        }
    }
    for e in &s.items {
        truth_scalar(e, s, out);
    }
    for (a, b) in &s.joins {
        truth_col(a, s, out);
        truth_col(b, s, out);
    }
    if let Some(p) = &s.where_clause {
        truth_pred(p, s, out);
    }
    for g in &s.group_by {
        truth_col(g, s, out);
    }
    if let Some(p) = &s.having {
        truth_pred(p, s, out);
    }
}

fn truth_col(c: &ColRef, s: &GenSelect, out: &mut LinkTarget) {
    let (table, column) = match &s.from[c.from] {
        Source::Table(t) => (t.clone(), c.column.clone()),
        Source::Derived { columns, .. } => {
            let d = columns.iter().find(|d| d.alias == c.column).expect("derived alias");
            (d.table.clone(), d.column.clone())
        }
    };
    out.tables.insert(table.to_lowercase());
    out.columns.insert((table.to_lowercase(), column.to_lowercase()));
}

fn truth_scalar(e: &Scalar, s: &GenSelect, out: &mut LinkTarget) {
    match e {
        Scalar::Col(c) => truth_col(c, s, out),
        Scalar::Lit(_) | Scalar::Star => {}
        Scalar::Agg { arg, .. } => truth_scalar(arg, s, out),
        Scalar::Arith { lhs, rhs, .. } => {
            truth_scalar(lhs, s, out);
            truth_scalar(rhs, s, out);
        }
        Scalar::Sub(q) => truth_query(q, out),
        Scalar::Aliased { expr, .. } => truth_scalar(expr, s, out),
    }
}

fn truth_pred(p: &Pred, s: &GenSelect, out: &mut LinkTarget) {
    match p {
        Pred::Cmp { lhs, rhs, .. } => {
            truth_scalar(lhs, s, out);
            truth_scalar(rhs, s, out);
        }
        Pred::Between { expr, .. }
        | Pred::Like { expr, .. }
        | Pred::InList { expr, .. }
        | Pred::IsNull { expr, .. } => truth_scalar(expr, s, out),
        Pred::InQuery { expr, query, .. } => {
            truth_scalar(expr, s, out);
            truth_query(query, out);
        }
        Pred::And(ps) | Pred::Or(ps) => ps.iter().for_each(|p| truth_pred(p, s, out)),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Qualify {
    Bare,
    TableName,
    Alias,
}

struct Printer<'r> {
    rng: Option<&'r mut ChaCha8Rng>,
    counter: u32,
    alias_prefix: &'static str,
}

struct Frame {
    names: Vec<String>,
    mode: Qualify,
}

impl<'r> Printer<'r> {
    fn canonical() -> Self {
        Self {
            rng: None,
            counter: 0,
            alias_prefix: "T",
        }
    }

    fn shuffled(rng: &'r mut ChaCha8Rng) -> Self {
        let alias_prefix = ["T", "a", "x", "tbl"].choose(rng).copied().unwrap_or("T");
        Self {
            rng: Some(rng),
            counter: 0,
            alias_prefix,
        }
    }

    fn shuffle<T>(&mut self, items: &mut [T]) {
        if let Some(rng) = self.rng.as_deref_mut() {
            items.shuffle(rng);
        }
    }

    fn coin(&mut self) -> bool {
        self.rng.as_deref_mut().is_some_and(|r| r.gen_bool(0.5))
    }

    fn query(&mut self, q: &GenQuery) -> String {
        let (mut out, frame) = match &q.body {
            Body::Select(s) => self.select(s, false),
            Body::Compound { op, left, right } => {
                let (mut l, frame) = self.select(left, true);
                let (mut r, _) = self.select(right, true);
                if *op != "EXCEPT" && self.coin() {
                    std::mem::swap(&mut l, &mut r);
                }
                (format!("{l} {op} {r}"), frame)
            }
        };
        if !q.order_by.is_empty() {
            let keys: Vec<String> = q
                .order_by
                .iter()
                .map(|(e, desc)| {
                    let e = self.scalar(e, &frame);
                    if *desc {
                        format!("{e} DESC")
                    } else if self.coin() {
                        format!("{e} ASC")
                    } else {
                        e
                    }
                })
                .collect();
            out.push_str(&format!(" ORDER BY {}", keys.join(", ")));
        }
        if let Some(n) = q.limit {
            out.push_str(&format!(" LIMIT {n}"));
        }
        out
    }

    fn select(&mut self, s: &GenSelect, in_compound: bool) -> (String, Frame) {
        let single_table = s.from.len() == 1 && matches!(s.from[0], Source::Table(_));
        let mode = if !single_table {
            Qualify::Alias
        } else if self.rng.is_some() {
            *[Qualify::Bare, Qualify::TableName, Qualify::Alias]
                .choose(self.rng.as_deref_mut().expect("checked"))
                .expect("nonempty")
        } else {
            Qualify::Bare
        };
        let names: Vec<String> = s
            .from
            .iter()
            .map(|src| match (mode, src) {
                (Qualify::Alias, _) => {
                    self.counter += 1;
                    format!("{}{}", self.alias_prefix, self.counter)
                }
                (_, Source::Table(t)) => t.clone(),
                (_, Source::Derived { .. }) => unreachable!("derived items are always aliased"),
            })
            .collect();
        let frame = Frame { names, mode };

        let mut items: Vec<String> = s.items.iter().map(|e| self.scalar(e, &frame)).collect();
        if !in_compound {
            self.shuffle(&mut items);
        }
        let mut out = String::from("SELECT ");
        if s.distinct {
            out.push_str("DISTINCT ");
        }
        out.push_str(&items.join(", "));
        out.push_str(" FROM ");
        out.push_str(&self.from(s, &frame));
        if let Some(p) = &s.where_clause {
            out.push_str(" WHERE ");
            out.push_str(&self.pred(p, &frame, false));
        }
        if !s.group_by.is_empty() {
            let mut keys: Vec<String> = s.group_by.iter().map(|c| self.col(c, &frame)).collect();
            self.shuffle(&mut keys);
            out.push_str(" GROUP BY ");
            out.push_str(&keys.join(", "));
        }
        if let Some(p) = &s.having {
            out.push_str(" HAVING ");
            out.push_str(&self.pred(p, &frame, false));
        }
        (out, frame)
    }

    fn source(&mut self, src: &Source, i: usize, frame: &Frame) -> String {
        let body = match src {
            Source::Table(t) => t.clone(),
            Source::Derived { query, .. } => format!("({})", self.query(query)),
        };
        if frame.mode == Qualify::Alias {
            format!("{body} AS {}", frame.names[i])
        } else {
            body
        }
    }

    fn join_cond(&mut self, (a, b): &(ColRef, ColRef), frame: &Frame) -> String {
        let (a, b) = (self.col(a, frame), self.col(b, frame));
        if self.coin() {
            format!("{b} = {a}")
        } else {
            format!("{a} = {b}")
        }
    }

    fn from(&mut self, s: &GenSelect, frame: &Frame) -> String {
        if self.rng.is_none() {
            // `A JOIN B ON .. JOIN C ON ..`, each condition after the item it links.
            let mut out = self.source(&s.from[0], 0, frame);
            for (k, j) in s.joins.iter().enumerate() {
                let src = self.source(&s.from[k + 1], k + 1, frame);
                let cond = self.join_cond(j, frame);
                out.push_str(&format!(" JOIN {src} ON {cond}"));
            }
            return out;
        }
        // Any item order, all conditions in one ON chain at the end.
        let mut order: Vec<usize> = (0..s.from.len()).collect();
        self.shuffle(&mut order);
        let sources: Vec<String> = order.iter().map(|&i| self.source(&s.from[i], i, frame)).collect();
        let mut conds: Vec<String> = s.joins.iter().map(|j| self.join_cond(j, frame)).collect();
        self.shuffle(&mut conds);
        let mut out = sources.join(" JOIN ");
        if !conds.is_empty() {
            out.push_str(" ON ");
            out.push_str(&conds.join(" AND "));
        }
        out
    }

    fn col(&mut self, c: &ColRef, frame: &Frame) -> String {
        match frame.mode {
            Qualify::Bare => c.column.clone(),
            _ => format!("{}.{}", frame.names[c.from], c.column),
        }
    }

    fn scalar(&mut self, e: &Scalar, frame: &Frame) -> String {
        match e {
            Scalar::Col(c) => self.col(c, frame),
            Scalar::Lit(v) => v.literal(),
            Scalar::Star => "*".into(),
            Scalar::Agg { func, distinct, arg } => {
                let arg = self.scalar(arg, frame);
                if *distinct {
                    format!("{func}(DISTINCT {arg})")
                } else {
                    format!("{func}({arg})")
                }
            }
            Scalar::Arith { op, lhs, rhs } => {
                let (l, r) = (self.scalar(lhs, frame), self.scalar(rhs, frame));
                format!("{l} {op} {r}")
            }
            Scalar::Sub(q) => format!("({})", self.query(q)),
            Scalar::Aliased { expr, alias } => format!("{} AS {alias}", self.scalar(expr, frame)),
        }
    }

    fn values(&mut self, items: &[Value]) -> String {
        let mut items: Vec<String> = items.iter().map(Value::literal).collect();
        self.shuffle(&mut items);
        items.join(", ")
    }

    fn pred(&mut self, p: &Pred, frame: &Frame, nested: bool) -> String {
        let not = |n: &bool| if *n { "NOT " } else { "" };
        match p {
            Pred::Cmp { op, lhs, rhs } => {
                let (l, r) = (self.scalar(lhs, frame), self.scalar(rhs, frame));
                format!("{l} {op} {r}")
            }
            Pred::Between {
                negated,
                expr,
                low,
                high,
            } => format!(
                "{} {}BETWEEN {} AND {}",
                self.scalar(expr, frame),
                not(negated),
                low.literal(),
                high.literal()
            ),
            Pred::Like { negated, expr, pattern } => format!(
                "{} {}LIKE {}",
                self.scalar(expr, frame),
                not(negated),
                Value::Text(pattern.clone()).literal()
            ),
            Pred::InList { negated, expr, items } => {
                let e = self.scalar(expr, frame);
                format!("{e} {}IN ({})", not(negated), self.values(items))
            }
            Pred::InQuery { negated, expr, query } => {
                let e = self.scalar(expr, frame);
                format!("{e} {}IN ({})", not(negated), self.query(query))
            }
            Pred::IsNull { negated, expr } => {
                let e = self.scalar(expr, frame);
                format!("{e} IS {}NULL", not(negated))
            }
            Pred::And(ps) | Pred::Or(ps) => {
                let sep = if matches!(p, Pred::And(_)) { " AND " } else { " OR " };
                let mut parts: Vec<String> = ps.iter().map(|q| self.pred(q, frame, true)).collect();
                self.shuffle(&mut parts);
                let joined = parts.join(sep);
                if nested {
                    format!("({joined})")
                } else {
                    joined
                }
            }
        }
    }
}

/// One generated query and its ground truth.
#[derive(Debug, Clone)]
pub struct GeneratedQuery {
    pub db_id: String,
    pub tree: GenQuery,
    pub sql: String,
    pub link: LinkTarget,
}

pub struct QueryGenerator<'a> {
    db: &'a FixtureDb,
    rng: ChaCha8Rng,
}

const NUMERIC_OPS: [&str; 6] = ["=", "!=", "<", "<=", ">", ">="];

impl<'a> QueryGenerator<'a> {
    pub fn new(db: &'a FixtureDb, seed: u64) -> Self {
        Self {
            db,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn generate(&mut self) -> GeneratedQuery {
        let tree = match self.rng.gen_range(0..100) {
            0..=19 => self.simple(),
            20..=29 => self.aggregate(),
            30..=44 => self.grouped(),
            45..=64 => self.joined(),
            65..=74 => self.in_subquery(),
            75..=81 => self.scalar_subquery(),
            82..=91 => self.compound(),
            _ => self.derived(),
        };
        GeneratedQuery {
            db_id: self.db.db_id.to_string(),
            sql: tree.sql(),
            link: tree.ground_truth(),
            tree,
        }
    }

    fn table(&mut self) -> &'a FixtureTable {
        self.db.tables.choose(&mut self.rng).expect("fixture has tables")
    }

    fn kind_of(&self, table: &str, column: &str) -> Kind {
        let t = self.db.table(table).expect("table");
        t.columns[t.column_index(column).expect("column")].kind
    }

    fn nullable(&self, table: &str, column: &str) -> bool {
        let t = self.db.table(table).expect("table");
        t.columns[t.column_index(column).expect("column")].nullable
    }

    fn columns(&mut self, t: &FixtureTable, n: usize) -> Vec<&'static str> {
        let mut names: Vec<&'static str> = t.columns.iter().map(|c| c.name).collect();
        names.shuffle(&mut self.rng);
        names.truncate(n.max(1));
        names
    }

    fn numeric_columns(&self, t: &FixtureTable) -> Vec<&'static str> {
        t.columns
            .iter()
            .filter(|c| c.kind != Kind::Text)
            .map(|c| c.name)
            .collect()
    }

    fn value(&mut self, table: &str, column: &str) -> Value {
        let values = self.db.table(table).expect("table").values(column);
        values.choose(&mut self.rng).cloned().unwrap_or(Value::Int(0))
    }

    fn pred_on(&mut self, c: ColRef, table: &str) -> Pred {
        let column = c.column.clone();
        let expr = Scalar::Col(c);
        if self.nullable(table, &column) && self.rng.gen_bool(0.3) {
            return Pred::IsNull {
                negated: self.rng.gen_bool(0.5),
                expr,
            };
        }
        let kind = self.kind_of(table, &column);
        let roll = self.rng.gen_range(0..10);
        if roll >= 8 {
            let mut items = vec![self.value(table, &column), self.value(table, &column)];
            if self.rng.gen_bool(0.5) {
                items.push(self.value(table, &column));
            }
            return Pred::InList {
                negated: self.rng.gen_bool(0.2),
                expr,
                items,
            };
        }
        if kind == Kind::Text {
            if roll < 5 {
                return Pred::Cmp {
                    op: if self.rng.gen_bool(0.8) { "=" } else { "!=" },
                    lhs: expr,
                    rhs: Scalar::Lit(self.value(table, &column)),
                };
            }
            let Value::Text(s) = self.value(table, &column) else {
                unreachable!("text column")
            };
            let chars: Vec<char> = s.chars().collect();
            let start = self.rng.gen_range(0..chars.len().max(1));
            let len = self.rng.gen_range(1..=3).min(chars.len() - start.min(chars.len()));
            let frag: String = chars[start..start + len].iter().collect();
            return Pred::Like {
                negated: self.rng.gen_bool(0.15),
                expr,
                pattern: format!("%{frag}%"),
            };
        }
        if roll < 6 {
            return Pred::Cmp {
                op: NUMERIC_OPS.choose(&mut self.rng).expect("ops"),
                lhs: expr,
                rhs: Scalar::Lit(self.value(table, &column)),
            };
        }
        let (a, b) = (self.value(table, &column), self.value(table, &column));
        let num = |v: &Value| match v {
            Value::Int(i) => *i as f64,
            Value::Real(r) => *r,
            _ => 0.0,
        };
        let (low, high) = if num(&a) <= num(&b) { (a, b) } else { (b, a) };
        Pred::Between {
            negated: self.rng.gen_bool(0.15),
            expr,
            low,
            high,
        }
    }

    /// One to three predicates over the given FROM items, combined with
    /// AND/OR and at most one nested group.
    fn where_over(&mut self, from: &[(usize, &'a FixtureTable)]) -> Pred {
        let n = self.rng.gen_range(1..=3);
        let mut preds: Vec<Pred> = (0..n)
            .map(|_| {
                let &(i, t) = from.choose(&mut self.rng).expect("from items");
                let column = t.columns.choose(&mut self.rng).expect("columns").name;
                self.pred_on(
                    ColRef {
                        from: i,
                        column: column.into(),
                    },
                    t.name,
                )
            })
            .collect();
        if preds.len() == 1 {
            return preds.pop().expect("one");
        }
        if preds.len() == 3 && self.rng.gen_bool(0.3) {
            let last = preds.pop().expect("three");
            let inner = if self.rng.gen_bool(0.5) {
                Pred::Or(preds)
            } else {
                Pred::And(preds)
            };
            return if self.rng.gen_bool(0.5) {
                Pred::And(vec![inner, last])
            } else {
                Pred::Or(vec![inner, last])
            };
        }
        if self.rng.gen_bool(0.7) {
            Pred::And(preds)
        } else {
            Pred::Or(preds)
        }
    }

    fn pk_order(&mut self, from: usize, t: &FixtureTable) -> Vec<(Scalar, bool)> {
        let desc = self.rng.gen_bool(0.4);
        t.primary_key
            .iter()
            .map(|k| {
                (
                    Scalar::Col(ColRef {
                        from,
                        column: (*k).into(),
                    }),
                    desc,
                )
            })
            .collect()
    }

    fn maybe_limit(&mut self) -> Option<u64> {
        self.rng.gen_bool(0.35).then(|| self.rng.gen_range(1..=5))
    }

    fn simple(&mut self) -> GenQuery {
        let t = self.table();
        let star = self.rng.gen_bool(0.1);
        let mut items: Vec<Scalar> = if star {
            vec![Scalar::Star]
        } else {
            let n = self.rng.gen_range(1..=3);
            self.columns(t, n)
                .into_iter()
                .map(|c| {
                    Scalar::Col(ColRef {
                        from: 0,
                        column: c.into(),
                    })
                })
                .collect()
        };
        let numeric = self.numeric_columns(t);
        if !star && numeric.len() >= 2 && self.rng.gen_bool(0.15) {
            let (a, b) = (numeric[0], numeric[1]);
            items.push(Scalar::Arith {
                op: ["+", "-", "*"].choose(&mut self.rng).expect("ops"),
                lhs: Box::new(Scalar::Col(ColRef {
                    from: 0,
                    column: a.into(),
                })),
                rhs: Box::new(Scalar::Col(ColRef {
                    from: 0,
                    column: b.into(),
                })),
            });
        }
        let distinct = !star && self.rng.gen_bool(0.2);
        let where_clause = self.rng.gen_bool(0.65).then(|| self.where_over(&[(0, t)]));
        let mut q = GenQuery::select(GenSelect {
            distinct,
            items: items.clone(),
            from: vec![Source::Table(t.name.into())],
            joins: vec![],
            where_clause,
            group_by: vec![],
            having: None,
        });
        if self.rng.gen_bool(0.4) {
            q.order_by = if distinct {
                let desc = self.rng.gen_bool(0.4);
                items.into_iter().map(|e| (e, desc)).collect()
            } else {
                self.pk_order(0, t)
            };
            q.limit = self.maybe_limit();
        }
        q
    }

    fn aggregate_over(&mut self, from: usize, t: &FixtureTable) -> Scalar {
        let numeric = self.numeric_columns(t);
        let col = |c: &str| Box::new(Scalar::Col(ColRef { from, column: c.into() }));
        match self.rng.gen_range(0..5) {
            0 => Scalar::Agg {
                func: "count",
                distinct: false,
                arg: Box::new(Scalar::Star),
            },
            1 => {
                let c = t.columns.choose(&mut self.rng).expect("columns").name;
                Scalar::Agg {
                    func: "count",
                    distinct: true,
                    arg: col(c),
                }
            }
            _ => {
                let c = numeric.choose(&mut self.rng).copied().unwrap_or(t.columns[0].name);
                Scalar::Agg {
                    func: ["sum", "avg", "min", "max"].choose(&mut self.rng).expect("funcs"),
                    distinct: false,
                    arg: col(c),
                }
            }
        }
    }

    fn aggregate(&mut self) -> GenQuery {
        let t = self.table();
        let n = self.rng.gen_range(1..=2);
        let mut items: Vec<Scalar> = (0..n).map(|_| self.aggregate_over(0, t)).collect();
        let numeric = self.numeric_columns(t);
        if let Some(c) = numeric.choose(&mut self.rng).filter(|_| self.rng.gen_bool(0.2)) {
            let agg = |f| {
                Box::new(Scalar::Agg {
                    func: f,
                    distinct: false,
                    arg: Box::new(Scalar::Col(ColRef {
                        from: 0,
                        column: (*c).into(),
                    })),
                })
            };
            items.push(Scalar::Arith {
                op: "-",
                lhs: agg("max"),
                rhs: agg("min"),
            });
        }
        let where_clause = self.rng.gen_bool(0.6).then(|| self.where_over(&[(0, t)]));
        GenQuery::select(GenSelect {
            distinct: false,
            items,
            from: vec![Source::Table(t.name.into())],
            joins: vec![],
            where_clause,
            group_by: vec![],
            having: None,
        })
    }

    /// FROM items along foreign keys starting at a referencing table.
    fn join_tree(&mut self) -> (Vec<&'a FixtureTable>, Vec<(ColRef, ColRef)>) {
        let roots: Vec<&'a FixtureTable> = self
            .db
            .tables
            .iter()
            .filter(|t| self.db.foreign_keys.iter().any(|fk| fk.0 == t.name))
            .collect();
        let root = *roots.choose(&mut self.rng).expect("fixture has foreign keys");
        let mut tables = vec![root];
        let mut joins = Vec::new();
        let want = self.rng.gen_range(2..=3);
        while tables.len() < want {
            let edges: Vec<(usize, &(&str, &str, &str, &str))> = self
                .db
                .foreign_keys
                .iter()
                .filter_map(|fk| {
                    let from = tables.iter().position(|t| t.name == fk.0)?;
                    (!tables.iter().any(|t| t.name == fk.2)).then_some((from, fk))
                })
                .collect();
            let Some(&(from, fk)) = edges.choose(&mut self.rng) else {
                break;
            };
            tables.push(self.db.table(fk.2).expect("fk target"));
            joins.push((
                ColRef {
                    from,
                    column: fk.1.into(),
                },
                ColRef {
                    from: tables.len() - 1,
                    column: fk.3.into(),
                },
            ));
        }
        (tables, joins)
    }

    fn joined(&mut self) -> GenQuery {
        let (tables, joins) = self.join_tree();
        let indexed: Vec<(usize, &'a FixtureTable)> = tables.iter().copied().enumerate().collect();
        let from: Vec<Source> = tables.iter().map(|t| Source::Table(t.name.into())).collect();
        let where_clause = self.rng.gen_bool(0.6).then(|| self.where_over(&indexed));
        if self.rng.gen_bool(0.3) {
            // Grouped join: one key from a referenced table.
            let (gi, gt) = indexed[self.rng.gen_range(1..indexed.len())];
            let key = gt.columns.choose(&mut self.rng).expect("columns").name;
            let key = ColRef {
                from: gi,
                column: key.into(),
            };
            let agg = self.aggregate_over(0, tables[0]);
            let mut q = GenQuery::select(GenSelect {
                distinct: false,
                items: vec![Scalar::Col(key.clone()), agg.clone()],
                from,
                joins,
                where_clause,
                group_by: vec![key.clone()],
                having: None,
            });
            if self.rng.gen_bool(0.5) {
                q.order_by = vec![(agg, self.rng.gen_bool(0.5)), (Scalar::Col(key), false)];
                q.limit = self.maybe_limit();
            }
            return q;
        }
        let n = self.rng.gen_range(1..=3);
        let items: Vec<Scalar> = (0..n)
            .map(|_| {
                let &(i, t) = indexed.choose(&mut self.rng).expect("tables");
                let c = t.columns.choose(&mut self.rng).expect("columns").name;
                Scalar::Col(ColRef {
                    from: i,
                    column: c.into(),
                })
            })
            .collect();
        let distinct = self.rng.gen_bool(0.2);
        let mut q = GenQuery::select(GenSelect {
            distinct,
            items: items.clone(),
            from,
            joins,
            where_clause,
            group_by: vec![],
            having: None,
        });
        if self.rng.gen_bool(0.4) {
            q.order_by = if distinct {
                items.into_iter().map(|e| (e, false)).collect()
            } else {
                self.pk_order(0, tables[0])
            };
            q.limit = self.maybe_limit();
        }
        q
    }

    fn grouped(&mut self) -> GenQuery {
        let t = self.table();
        let nkeys = if t.columns.len() > 2 && self.rng.gen_bool(0.2) {
            2
        } else {
            1
        };
        let keys: Vec<ColRef> = self
            .columns(t, nkeys)
            .into_iter()
            .map(|c| ColRef {
                from: 0,
                column: c.into(),
            })
            .collect();
        let agg = self.aggregate_over(0, t);
        let mut items: Vec<Scalar> = keys.iter().cloned().map(Scalar::Col).collect();
        items.push(agg.clone());
        let having = self.rng.gen_bool(0.35).then(|| Pred::Cmp {
            op: [">", ">=", "<", "="].choose(&mut self.rng).expect("ops"),
            lhs: Scalar::Agg {
                func: "count",
                distinct: false,
                arg: Box::new(Scalar::Star),
            },
            rhs: Scalar::Lit(Value::Int(self.rng.gen_range(1..=3))),
        });
        let where_clause = self.rng.gen_bool(0.4).then(|| self.where_over(&[(0, t)]));
        let mut q = GenQuery::select(GenSelect {
            distinct: false,
            items,
            from: vec![Source::Table(t.name.into())],
            joins: vec![],
            where_clause,
            group_by: keys.clone(),
            having,
        });
        if self.rng.gen_bool(0.5) {
            let desc = self.rng.gen_bool(0.5);
            let mut order: Vec<(Scalar, bool)> = Vec::new();
            if self.rng.gen_bool(0.5) {
                order.push((agg, desc));
            }
            order.extend(keys.into_iter().map(|k| (Scalar::Col(k), desc)));
            q.order_by = order;
            q.limit = self.maybe_limit();
        }
        q
    }

    fn in_subquery(&mut self) -> GenQuery {
        let fks = &self.db.foreign_keys;
        let &(a, a_col, b, b_col) = fks.choose(&mut self.rng).expect("foreign keys");
        // Either referencing rows whose target qualifies, or the reverse.
        let (outer, outer_col, inner, inner_col) = if self.rng.gen_bool(0.5) {
            (a, a_col, b, b_col)
        } else {
            (b, b_col, a, a_col)
        };
        let (ot, it) = (
            self.db.table(outer).expect("table"),
            self.db.table(inner).expect("table"),
        );
        let inner_where = self.where_over(&[(0, it)]);
        let sub = GenQuery::select(GenSelect {
            distinct: false,
            items: vec![Scalar::Col(ColRef {
                from: 0,
                column: inner_col.into(),
            })],
            from: vec![Source::Table(inner.into())],
            joins: vec![],
            where_clause: Some(inner_where),
            group_by: vec![],
            having: None,
        });
        let n = self.rng.gen_range(1..=2);
        let items = self
            .columns(ot, n)
            .into_iter()
            .map(|c| {
                Scalar::Col(ColRef {
                    from: 0,
                    column: c.into(),
                })
            })
            .collect();
        let mut pred = Pred::InQuery {
            negated: self.rng.gen_bool(0.3),
            expr: Scalar::Col(ColRef {
                from: 0,
                column: outer_col.into(),
            }),
            query: Box::new(sub),
        };
        if self.rng.gen_bool(0.3) {
            pred = Pred::And(vec![pred, self.where_over(&[(0, ot)])]);
        }
        let mut q = GenQuery::select(GenSelect {
            distinct: false,
            items,
            from: vec![Source::Table(outer.into())],
            joins: vec![],
            where_clause: Some(pred),
            group_by: vec![],
            having: None,
        });
        if self.rng.gen_bool(0.3) {
            q.order_by = self.pk_order(0, ot);
        }
        q
    }

    fn scalar_subquery(&mut self) -> GenQuery {
        let t = self.table();
        let numeric = self.numeric_columns(t);
        let c = *numeric
            .choose(&mut self.rng)
            .expect("every fixture table has a numeric column");
        let col = ColRef {
            from: 0,
            column: c.into(),
        };
        let sub = if self.rng.gen_bool(0.6) {
            let where_clause = self.rng.gen_bool(0.5).then(|| self.where_over(&[(0, t)]));
            GenQuery::select(GenSelect {
                distinct: false,
                items: vec![Scalar::Agg {
                    func: ["avg", "min", "max"].choose(&mut self.rng).expect("funcs"),
                    distinct: false,
                    arg: Box::new(Scalar::Col(col.clone())),
                }],
                from: vec![Source::Table(t.name.into())],
                joins: vec![],
                where_clause,
                group_by: vec![],
                having: None,
            })
        } else {
            // Top-1 by primary key.
            let mut q = GenQuery::select(GenSelect {
                distinct: false,
                items: vec![Scalar::Col(col.clone())],
                from: vec![Source::Table(t.name.into())],
                joins: vec![],
                where_clause: None,
                group_by: vec![],
                having: None,
            });
            q.order_by = self.pk_order(0, t);
            q.limit = Some(1);
            q
        };
        let n = self.rng.gen_range(1..=2);
        let items = self
            .columns(t, n)
            .into_iter()
            .map(|c| {
                Scalar::Col(ColRef {
                    from: 0,
                    column: c.into(),
                })
            })
            .collect();
        GenQuery::select(GenSelect {
            distinct: false,
            items,
            from: vec![Source::Table(t.name.into())],
            joins: vec![],
            where_clause: Some(Pred::Cmp {
                op: NUMERIC_OPS.choose(&mut self.rng).expect("ops"),
                lhs: Scalar::Col(col),
                rhs: Scalar::Sub(Box::new(sub)),
            }),
            group_by: vec![],
            having: None,
        })
    }

    fn compound(&mut self) -> GenQuery {
        let op = *["UNION", "INTERSECT", "EXCEPT"].choose(&mut self.rng).expect("ops");
        let block = |g: &mut Self, table: &'a FixtureTable, columns: &[&str]| GenSelect {
            distinct: false,
            items: columns
                .iter()
                .map(|c| {
                    Scalar::Col(ColRef {
                        from: 0,
                        column: (*c).into(),
                    })
                })
                .collect(),
            from: vec![Source::Table(table.name.into())],
            joins: vec![],
            where_clause: Some(g.where_over(&[(0, table)])),
            group_by: vec![],
            having: None,
        };
        let (left, right) = if self.rng.gen_bool(0.5) {
            // Same table, same columns, different filters.
            let t = self.table();
            let n = self.rng.gen_range(1..=2);
            let cols = self.columns(t, n);
            (block(self, t, &cols), block(self, t, &cols))
        } else {
            // Key values on both sides of a foreign key.
            let &(a, a_col, b, b_col) = self.db.foreign_keys.choose(&mut self.rng).expect("foreign keys");
            let (ta, tb) = (self.db.table(a).expect("table"), self.db.table(b).expect("table"));
            (block(self, ta, &[a_col]), block(self, tb, &[b_col]))
        };
        GenQuery {
            body: Body::Compound {
                op,
                left: Box::new(left),
                right: Box::new(right),
            },
            order_by: vec![],
            limit: None,
        }
    }

    fn derived(&mut self) -> GenQuery {
        let t = self.table();
        let n = self.rng.gen_range(1..=3);
        let cols = self.columns(t, n);
        let columns: Vec<DerivedColumn> = cols
            .iter()
            .enumerate()
            .map(|(i, c)| DerivedColumn {
                alias: format!("c{i}"),
                table: t.name.into(),
                column: (*c).into(),
            })
            .collect();
        let inner_where = self.rng.gen_bool(0.6).then(|| self.where_over(&[(0, t)]));
        let inner = GenQuery::select(GenSelect {
            distinct: false,
            items: columns
                .iter()
                .map(|d| Scalar::Aliased {
                    expr: Box::new(Scalar::Col(ColRef {
                        from: 0,
                        column: d.column.clone(),
                    })),
                    alias: d.alias.clone(),
                })
                .collect(),
            from: vec![Source::Table(t.name.into())],
            joins: vec![],
            where_clause: inner_where,
            group_by: vec![],
            having: None,
        });
        let outer_n = self.rng.gen_range(1..=columns.len());
        let items = columns[..outer_n]
            .iter()
            .map(|d| {
                Scalar::Col(ColRef {
                    from: 0,
                    column: d.alias.clone(),
                })
            })
            .collect();
        let d = columns.choose(&mut self.rng).expect("columns").clone();
        let outer_where = self.rng.gen_bool(0.5).then(|| {
            let v = self.value(&d.table, &d.column);
            Pred::Cmp {
                op: "!=",
                lhs: Scalar::Col(ColRef {
                    from: 0,
                    column: d.alias.clone(),
                }),
                rhs: Scalar::Lit(v),
            }
        });
        GenQuery::select(GenSelect {
            distinct: false,
            items,
            from: vec![Source::Derived {
                query: Box::new(inner),
                columns,
            }],
            joins: vec![],
            where_clause: outer_where,
            group_by: vec![],
            having: None,
        })
    }
}

/// `n` queries per fixture database, seeded per database.
pub fn corpus(dbs: &[FixtureDb], per_db: usize, seed: u64) -> Vec<GeneratedQuery> {
    dbs.iter()
        .enumerate()
        .flat_map(|(i, db)| {
            let mut g = QueryGenerator::new(db, seed.wrapping_add(i as u64 * 7919));
            (0..per_db).map(move |_| g.generate())
        })
        .collect()
}
