use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::SqlError;

const RESERVED: &[&str] = &[
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
];

fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

/// Parses one statement into an unresolved tree.
pub(crate) fn parse_statement(src: &str) -> Result<Query, SqlError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let q = p.query()?;
    p.eat(&TokenKind::Semicolon);
    match p.peek().kind {
        TokenKind::Eof => Ok(q),
        _ => Err(p.unexpected("end of statement")),
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Token {
        let last = self.toks.len() - 1;
        &self.toks[(self.pos + offset).min(last)]
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if &self.peek().kind == kind {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.peek().is_word(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<(), SqlError> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn expect_word(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&kw.to_ascii_uppercase()))
        }
    }

    fn unexpected(&self, expected: &str) -> SqlError {
        let t = self.peek();
        let found = match &t.kind {
            TokenKind::Eof => "end of input".to_string(),
            TokenKind::Word(w) | TokenKind::Number(w) => format!("`{w}`"),
            TokenKind::QuotedIdent(w) => format!("identifier `{w}`"),
            TokenKind::Str(s) => format!("string '{s}'"),
            other => format!("{other:?}"),
        };
        SqlError::syntax(t.pos, format!("expected {expected}, found {found}"))
    }

    fn unsupported(&self, what: &str) -> SqlError {
        SqlError::syntax(self.peek().pos, format!("unsupported construct: {what}"))
    }

    /// Non-reserved bare word or quoted identifier.
    fn ident(&mut self) -> Option<String> {
        match &self.peek().kind {
            TokenKind::Word(w) if !is_reserved(w) => {
                let w = w.clone();
                self.advance();
                Some(w)
            }
            TokenKind::QuotedIdent(w) => {
                let w = w.clone();
                self.advance();
                Some(w)
            }
            _ => None,
        }
    }

    fn alias(&mut self) -> Result<Option<String>, SqlError> {
        if self.eat_word("as") {
            if let TokenKind::Str(s) = &self.peek().kind {
                let s = s.clone();
                self.advance();
                return Ok(Some(s));
            }
            return self.ident().map(Some).ok_or_else(|| self.unexpected("alias"));
        }
        Ok(self.ident())
    }

    fn query(&mut self) -> Result<Query, SqlError> {
        let body = self.set_expr()?;
        let mut order_by = Vec::new();
        if self.eat_word("order") {
            self.expect_word("by")?;
            loop {
                if let TokenKind::Number(_) = self.peek().kind {
                    return Err(self.unsupported("positional ORDER BY"));
                }
                let expr = self.expr()?;
                let desc = if self.eat_word("desc") {
                    true
                } else {
                    self.eat_word("asc");
                    false
                };
                order_by.push(OrderItem { expr, desc });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let mut limit = None;
        if self.eat_word("limit") {
            match self.peek().kind.clone() {
                TokenKind::Number(n) => {
                    let v = n
                        .parse::<u64>()
                        .map_err(|_| SqlError::syntax(self.peek().pos, "LIMIT needs a non-negative integer"))?;
                    self.advance();
                    limit = Some(v);
                }
                _ => return Err(self.unexpected("LIMIT count")),
            }
            if self.peek().is_word("offset") || self.peek().kind == TokenKind::Comma {
                return Err(self.unsupported("LIMIT offset"));
            }
        }
        Ok(Query { body, order_by, limit })
    }

    fn set_expr(&mut self) -> Result<SetExpr, SqlError> {
        let mut left = SetExpr::Select(Box::new(self.select()?));
        loop {
            let op = if self.eat_word("union") {
                SetOp::Union
            } else if self.eat_word("intersect") {
                SetOp::Intersect
            } else if self.eat_word("except") {
                SetOp::Except
            } else {
                return Ok(left);
            };
            if self.peek().is_word("all") {
                return Err(self.unsupported(&format!("{} ALL", op.keyword())));
            }
            let right = SetExpr::Select(Box::new(self.select()?));
            left = SetExpr::Compound {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
    }

    fn select(&mut self) -> Result<Select, SqlError> {
        self.expect_word("select")?;
        let mut sel = Select {
            distinct: self.eat_word("distinct"),
            ..Select::default()
        };
        loop {
            sel.items.push(self.select_item()?);
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        if self.eat_word("from") {
            self.from_clause(&mut sel)?;
        }
        if self.eat_word("where") {
            sel.where_clause = Some(self.cond()?);
        }
        if self.eat_word("group") {
            self.expect_word("by")?;
            loop {
                sel.group_by.push(self.expr()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        if self.eat_word("having") {
            sel.having = Some(self.cond()?);
        }
        Ok(sel)
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        if self.eat(&TokenKind::Star) {
            return Ok(SelectItem {
                expr: Expr::Star(None),
                alias: None,
            });
        }
        let qualified_star = matches!(self.peek().kind, TokenKind::Word(_) | TokenKind::QuotedIdent(_))
            && self.peek_at(1).kind == TokenKind::Dot
            && self.peek_at(2).kind == TokenKind::Star;
        if qualified_star {
            let table = self.ident().ok_or_else(|| self.unexpected("table name"))?;
            self.advance();
            self.advance();
            return Ok(SelectItem {
                expr: Expr::Star(Some(StarScope {
                    table,
                    binding: Binding::default(),
                })),
                alias: None,
            });
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem { expr, alias })
    }

    fn from_clause(&mut self, sel: &mut Select) -> Result<(), SqlError> {
        sel.from.push(self.table_ref()?);
        loop {
            if self.eat(&TokenKind::Comma) {
                sel.from.push(self.table_ref()?);
                continue;
            }
            for kw in ["left", "right", "full", "outer", "cross", "natural"] {
                if self.peek().is_word(kw) {
                    return Err(self.unsupported(&format!("{} JOIN", kw.to_ascii_uppercase())));
                }
            }
            let joined = if self.eat_word("inner") {
                self.expect_word("join")?;
                true
            } else {
                self.eat_word("join")
            };
            if !joined {
                return Ok(());
            }
            sel.from.push(self.table_ref()?);
            if self.eat_word("on") {
                let at = self.peek().pos;
                let cond = self.cond()?;
                join_pairs(cond, &mut sel.joins).map_err(|msg| SqlError::syntax(at, msg))?;
            } else if self.peek().is_word("using") {
                return Err(self.unsupported("JOIN ... USING"));
            }
        }
    }

    fn table_ref(&mut self) -> Result<FromItem, SqlError> {
        if self.peek().kind == TokenKind::LParen {
            self.advance();
            if !self.peek().is_word("select") {
                return Err(self.unsupported("parenthesized join"));
            }
            let q = self.query()?;
            self.expect(TokenKind::RParen, "`)`")?;
            let alias = self.alias()?;
            return Ok(FromItem {
                source: FromSource::Derived(Box::new(q)),
                alias,
            });
        }
        let name = self.ident().ok_or_else(|| self.unexpected("table name"))?;
        let alias = self.alias()?;
        Ok(FromItem {
            source: FromSource::Table(name),
            alias,
        })
    }

    fn cond(&mut self) -> Result<Cond, SqlError> {
        let mut parts = vec![self.and_cond()?];
        while self.eat_word("or") {
            parts.push(self.and_cond()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Cond::Or(parts)
        })
    }

    fn and_cond(&mut self) -> Result<Cond, SqlError> {
        let mut parts = vec![self.not_cond()?];
        while self.eat_word("and") {
            parts.push(self.not_cond()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Cond::And(parts)
        })
    }

    fn not_cond(&mut self) -> Result<Cond, SqlError> {
        if self.eat_word("not") {
            let inner = self.not_cond()?;
            return Ok(negate(inner));
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<Cond, SqlError> {
        if self.eat_word("exists") {
            self.expect(TokenKind::LParen, "`(`")?;
            let q = self.query()?;
            self.expect(TokenKind::RParen, "`)`")?;
            return Ok(Cond::Exists {
                negated: false,
                query: Box::new(q),
            });
        }
        if self.peek().kind == TokenKind::LParen && !self.peek_at(1).is_word("select") {
            let saved = self.pos;
            self.advance();
            if let Ok(inner) = self.cond() {
                if self.eat(&TokenKind::RParen) && !self.continues_expression() {
                    return Ok(inner);
                }
            }
            self.pos = saved;
        }
        let lhs = self.expr()?;
        let cmp = match self.peek().kind {
            TokenKind::Eq => Some(CmpOp::Eq),
            TokenKind::Ne => Some(CmpOp::Ne),
            TokenKind::Lt => Some(CmpOp::Lt),
            TokenKind::Le => Some(CmpOp::Le),
            TokenKind::Gt => Some(CmpOp::Gt),
            TokenKind::Ge => Some(CmpOp::Ge),
            _ => None,
        };
        if let Some(op) = cmp {
            self.advance();
            let rhs = self.expr()?;
            return Ok(Cond::Compare { op, lhs, rhs });
        }
        if self.eat_word("is") {
            let negated = self.eat_word("not");
            self.expect_word("null")?;
            return Ok(Cond::IsNull { negated, expr: lhs });
        }
        let negated = self.eat_word("not");
        if self.eat_word("between") {
            let low = self.expr()?;
            self.expect_word("and")?;
            let high = self.expr()?;
            return Ok(Cond::Between {
                negated,
                expr: lhs,
                low,
                high,
            });
        }
        if self.eat_word("like") {
            let pattern = self.expr()?;
            return Ok(Cond::Like {
                negated,
                expr: lhs,
                pattern,
            });
        }
        if self.eat_word("in") {
            self.expect(TokenKind::LParen, "`(`")?;
            let set = if self.peek().is_word("select") {
                InSet::Query(Box::new(self.query()?))
            } else {
                let mut items = vec![self.expr()?];
                while self.eat(&TokenKind::Comma) {
                    items.push(self.expr()?);
                }
                InSet::List(items)
            };
            self.expect(TokenKind::RParen, "`)`")?;
            return Ok(Cond::In {
                negated,
                expr: lhs,
                set,
            });
        }
        Err(self.unexpected("comparison operator"))
    }

    /// True when the next token would extend a parenthesized operand into a
    /// larger expression, so the parenthesis was not a condition group.
    fn continues_expression(&self) -> bool {
        let t = self.peek();
        matches!(
            t.kind,
            TokenKind::Eq
                | TokenKind::Ne
                | TokenKind::Lt
                | TokenKind::Le
                | TokenKind::Gt
                | TokenKind::Ge
                | TokenKind::Plus
                | TokenKind::Minus
                | TokenKind::Star
                | TokenKind::Slash
                | TokenKind::Percent
        ) || ["is", "not", "between", "like", "in"].iter().any(|kw| t.is_word(kw))
    }

    fn expr(&mut self) -> Result<Expr, SqlError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => ArithOp::Add,
                TokenKind::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::Arith {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn term(&mut self) -> Result<Expr, SqlError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => ArithOp::Mul,
                TokenKind::Slash => ArithOp::Div,
                TokenKind::Percent => ArithOp::Mod,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Arith {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn unary(&mut self) -> Result<Expr, SqlError> {
        if self.eat(&TokenKind::Minus) {
            if let TokenKind::Number(n) = &self.peek().kind {
                let text = format!("-{n}");
                self.advance();
                return Ok(Expr::Literal(Literal::Number(canonical_number(&text))));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(&TokenKind::Plus) {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, SqlError> {
        let tok = self.peek().clone();
        match tok.kind {
            TokenKind::Number(n) => {
                self.advance();
                Ok(Expr::Literal(Literal::Number(canonical_number(&n))))
            }
            TokenKind::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Literal::Str(s)))
            }
            TokenKind::LParen => {
                self.advance();
                let e = if self.peek().is_word("select") {
                    Expr::Subquery(Box::new(self.query()?))
                } else {
                    self.expr()?
                };
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(e)
            }
            TokenKind::Word(ref w) if w.eq_ignore_ascii_case("null") => {
                self.advance();
                Ok(Expr::Literal(Literal::Null))
            }
            TokenKind::Word(ref w) if self.peek_at(1).kind == TokenKind::LParen => {
                let Some(func) = AggFunc::from_name(w) else {
                    return Err(SqlError::syntax(tok.pos, format!("unsupported function `{w}`")));
                };
                self.advance();
                self.advance();
                let distinct = self.eat_word("distinct");
                let arg = if self.eat(&TokenKind::Star) {
                    if func != AggFunc::Count {
                        return Err(SqlError::syntax(tok.pos, format!("`{}(*)` is not valid", func.name())));
                    }
                    Expr::Star(None)
                } else {
                    self.expr()?
                };
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(Expr::Aggregate {
                    func,
                    distinct,
                    arg: Box::new(arg),
                })
            }
            TokenKind::Word(_) | TokenKind::QuotedIdent(_) => {
                let Some(first) = self.ident() else {
                    return Err(self.unexpected("expression"));
                };
                if self.eat(&TokenKind::Dot) {
                    let column = self.ident().ok_or_else(|| self.unexpected("column name"))?;
                    return Ok(Expr::Column(ColumnRef::new(first, column)));
                }
                Ok(Expr::Column(ColumnRef::new(String::new(), first)))
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

fn negate(cond: Cond) -> Cond {
    match cond {
        Cond::In { negated, expr, set } => Cond::In {
            negated: !negated,
            expr,
            set,
        },
        Cond::Like { negated, expr, pattern } => Cond::Like {
            negated: !negated,
            expr,
            pattern,
        },
        Cond::Between {
            negated,
            expr,
            low,
            high,
        } => Cond::Between {
            negated: !negated,
            expr,
            low,
            high,
        },
        Cond::Exists { negated, query } => Cond::Exists {
            negated: !negated,
            query,
        },
        Cond::IsNull { negated, expr } => Cond::IsNull {
            negated: !negated,
            expr,
        },
        other => Cond::Not(Box::new(other)),
    }
}

/// Splits an ON condition into column-equality pairs.
fn join_pairs(cond: Cond, out: &mut Vec<JoinCondition>) -> Result<(), String> {
    match cond {
        Cond::And(parts) => parts.into_iter().try_for_each(|p| join_pairs(p, out)),
        Cond::Compare {
            op: CmpOp::Eq,
            lhs: Expr::Column(left),
            rhs: Expr::Column(right),
        } => {
            out.push(JoinCondition { left, right });
            Ok(())
        }
        _ => Err("unsupported construct: JOIN ... ON accepts only column equalities joined by AND".into()),
    }
}
