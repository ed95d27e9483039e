//! Recursive-descent parser for queries and expressions.
//!
//! ```text
//! query    := [IDENT "="] ["distinct"] "{" sources ["|" expr] "}" ["<" rets ">"]
//! sources  := src {"," src}
//! src      := [IDENT (":"|"in"|"from")] (path ["=" (path|const)] | literal | block)
//! literal  := "{" tuple {"," tuple} "}" ["<" IDENT {"," IDENT} ">"]
//! tuple    := "<" const {"," const} ">" | const
//! rets     := ret {"," ret} ; ret := [IDENT "="] expr
//! block    := "begin" stmts "over" src ["before" stmts] "where" "(" expr ")"
//!             ["after" stmts] "end" stmts "return" "<" rets ">"
//! stmts    := "{" {IDENT ":=" expr ";"} "}"
//! ```
//!
//! Inside a return list a bare `>`/`>=` would close the list, so comparisons
//! using them must be parenthesized there.

use crate::error::{Error, Result};
use crate::lex::{Cursor, Tok};
use crate::query::ast::*;

pub fn parse_query(text: &str) -> Result<Query> {
    let mut p = Parser::new(text)?;
    let q = p.query(true)?;
    p.cur.expect_eof()?;
    Ok(q)
}

pub fn parse_expr(text: &str) -> Result<Expr> {
    let mut p = Parser::new(text)?;
    let e = p.expr(false)?;
    p.cur.expect_eof()?;
    Ok(e)
}

/// Parses a constant such as `"x"`, `-3`, `2.5`, `true`, `null` or `Sizes#1`.
pub fn parse_const(text: &str) -> Result<Const> {
    let mut p = Parser::new(text)?;
    let c = p.constant()?;
    p.cur.expect_eof()?;
    Ok(c)
}

/// An item line: `Concept <v1, v2>` or, with an explicit id, `Concept#7 <v1, v2>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataLine {
    pub concept: String,
    pub id: Option<u64>,
    pub values: Vec<Const>,
}

pub fn parse_data_line(text: &str) -> Result<DataLine> {
    let mut p = Parser::new(text)?;
    let (concept, id) = match p.cur.peek().clone() {
        Tok::Ident(c) => (c, None),
        Tok::Ref(c, id) => (c, Some(id)),
        _ => return Err(p.cur.error("a concept name")),
    };
    p.cur.bump();
    p.cur.expect_punct("<")?;
    let mut values = vec![p.constant()?];
    while p.cur.eat_punct(",") {
        values.push(p.constant()?);
    }
    p.cur.expect_punct(">")?;
    p.cur.expect_eof()?;
    Ok(DataLine { concept, id, values })
}

pub(crate) struct Parser {
    pub(crate) cur: Cursor,
}

fn kw_ci(tok: &Tok, kw: &str) -> bool {
    matches!(tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
}

impl Parser {
    pub(crate) fn new(text: &str) -> Result<Self> {
        Ok(Parser { cur: Cursor::new(text)? })
    }

    fn ident(&mut self) -> Result<String> {
        match self.cur.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.cur.bump();
                Ok(s)
            }
            _ => Err(self.cur.error("identifier")),
        }
    }

    /// Segment after a `.`; reserved words are allowed here.
    fn segment(&mut self) -> Result<String> {
        self.cur.expect_ident()
    }

    fn starts_query(&self) -> bool {
        self.cur.is_punct("{")
            || (self.cur.is_kw("distinct") && matches!(self.cur.peek_at(1), Tok::Punct("{")))
    }

    pub(crate) fn query(&mut self, allow_name: bool) -> Result<Query> {
        let mut name = None;
        if allow_name
            && matches!(self.cur.peek(), Tok::Ident(s) if !is_reserved(s))
            && matches!(self.cur.peek_at(1), Tok::Punct("="))
        {
            name = Some(self.ident()?);
            self.cur.bump();
        }
        let distinct = self.cur.eat_kw("distinct");
        self.cur.expect_punct("{")?;

        if self.cur.is_kw("begin") {
            let (over, predicate, blocks, returns) = self.block()?;
            self.cur.expect_punct("}")?;
            return Ok(Query {
                name,
                distinct,
                sources: vec![over],
                predicate: Some(predicate),
                returns,
                blocks: Some(blocks),
            });
        }

        let mut sources = vec![self.source()?];
        while self.cur.eat_punct(",") {
            sources.push(self.source()?);
        }
        let predicate = if self.cur.eat_punct("|") {
            Some(self.expr(false)?)
        } else {
            None
        };
        self.cur.expect_punct("}")?;
        let returns = if self.cur.eat_punct("<") {
            let r = self.rets()?;
            self.cur.expect_punct(">")?;
            r
        } else {
            Vec::new()
        };
        Ok(Query {
            name,
            distinct,
            sources,
            predicate,
            returns,
            blocks: None,
        })
    }

    fn block(&mut self) -> Result<(Source, Expr, Blocks, Vec<Ret>)> {
        self.cur.expect_kw("begin")?;
        let begin = self.stmts()?;
        self.cur.expect_kw("over")?;
        let over = self.source()?;
        let before = if self.cur.eat_kw("before") {
            self.stmts()?
        } else {
            Vec::new()
        };
        self.cur.expect_kw("where")?;
        self.cur.expect_punct("(")?;
        let predicate = self.expr(false)?;
        self.cur.expect_punct(")")?;
        let after = if self.cur.eat_kw("after") {
            self.stmts()?
        } else {
            Vec::new()
        };
        self.cur.expect_kw("end")?;
        let end = self.stmts()?;
        self.cur.expect_kw("return")?;
        self.cur.expect_punct("<")?;
        let rets = self.rets()?;
        self.cur.expect_punct(">")?;
        Ok((
            over,
            predicate,
            Blocks {
                begin,
                before,
                after,
                end,
            },
            rets,
        ))
    }

    fn stmts(&mut self) -> Result<Vec<Stmt>> {
        self.cur.expect_punct("{")?;
        let mut out = Vec::new();
        while !self.cur.is_punct("}") {
            let var = self.ident()?;
            self.cur.expect_punct(":=")?;
            let expr = self.expr(false)?;
            self.cur.expect_punct(";")?;
            out.push(Stmt { var, expr });
        }
        self.cur.bump();
        Ok(out)
    }

    fn source(&mut self) -> Result<Source> {
        let mut binder = None;
        if let Tok::Ident(s) = self.cur.peek() {
            if !is_reserved(s)
                && (matches!(self.cur.peek_at(1), Tok::Punct(":"))
                    || matches!(self.cur.peek_at(1), Tok::Ident(k) if k == "in" || k == "from"))
            {
                binder = Some(self.ident()?);
                self.cur.bump();
            }
        }
        if self.cur.is_kw("begin") {
            return Err(self.cur.error("a block query to be the only source of its query"));
        }
        if self.cur.eat_punct("{") {
            let mut rows = vec![self.tuple()?];
            while self.cur.eat_punct(",") {
                rows.push(self.tuple()?);
            }
            self.cur.expect_punct("}")?;
            let mut names = Vec::new();
            if self.cur.eat_punct("<") {
                names.push(self.ident()?);
                while self.cur.eat_punct(",") {
                    names.push(self.ident()?);
                }
                self.cur.expect_punct(">")?;
            }
            return Ok(Source {
                binder,
                kind: SourceKind::Literal { rows, names },
            });
        }
        let head = match self.cur.peek().clone() {
            Tok::Ref(c, id) => {
                self.cur.bump();
                Head::Ref(c, id)
            }
            _ => Head::Name(self.ident().map_err(|_| self.cur.error("source"))?),
        };
        let mut steps = Vec::new();
        while self.cur.eat_punct(".") {
            steps.push(self.segment()?);
        }
        let restrict = if self.cur.eat_punct("=") {
            match self.cur.peek().clone() {
                Tok::Ident(s) if !is_reserved(&s) => {
                    self.cur.bump();
                    Some(Restrict::Param(s, self.steps()?))
                }
                _ => Some(Restrict::Const(self.constant()?)),
            }
        } else {
            None
        };
        Ok(Source {
            binder,
            kind: SourceKind::Path {
                head,
                steps,
                restrict,
            },
        })
    }

    fn tuple(&mut self) -> Result<Vec<Const>> {
        if self.cur.eat_punct("<") {
            let mut out = vec![self.constant()?];
            while self.cur.eat_punct(",") {
                out.push(self.constant()?);
            }
            self.cur.expect_punct(">")?;
            Ok(out)
        } else {
            Ok(vec![self.constant()?])
        }
    }

    pub(crate) fn constant(&mut self) -> Result<Const> {
        let neg = self.cur.is_punct("-")
            && matches!(self.cur.peek_at(1), Tok::Int(_) | Tok::Real(_));
        if neg {
            self.cur.bump();
        }
        let c = match self.cur.peek().clone() {
            Tok::Int(s) => Const::Int(self.int_literal(&s, neg)?),
            Tok::Real(s) => {
                let v: f64 = s.parse().map_err(|_| self.cur.error("number"))?;
                Const::Real(if neg { -v } else { v })
            }
            Tok::Str(s) => Const::Str(s),
            Tok::Ref(c, id) => Const::Ref(c, id),
            Tok::Hex(h) => Const::Hex(h),
            Tok::Ident(s) if s == "true" => Const::Bool(true),
            Tok::Ident(s) if s == "false" => Const::Bool(false),
            Tok::Ident(s) if s == "null" => Const::Null,
            _ => return Err(self.cur.error("constant")),
        };
        self.cur.bump();
        Ok(c)
    }

    fn int_literal(&self, digits: &str, neg: bool) -> Result<i64> {
        let text = if neg {
            format!("-{digits}")
        } else {
            digits.to_string()
        };
        text.parse::<i64>()
            .map_err(|_| Error::syntax(self.cur.pos(), "integer in 64-bit range", text))
    }

    fn rets(&mut self) -> Result<Vec<Ret>> {
        let mut out = vec![self.ret()?];
        while self.cur.eat_punct(",") {
            out.push(self.ret()?);
        }
        Ok(out)
    }

    fn ret(&mut self) -> Result<Ret> {
        let mut name = None;
        if matches!(self.cur.peek(), Tok::Ident(s) if !is_reserved(s))
            && matches!(self.cur.peek_at(1), Tok::Punct("="))
        {
            name = Some(self.ident()?);
            self.cur.bump();
        }
        let expr = self.expr(true)?;
        Ok(Ret { name, expr })
    }

    /// `no_gt` is set inside return lists, where `>` closes the list.
    pub(crate) fn expr(&mut self, no_gt: bool) -> Result<Expr> {
        self.or(no_gt)
    }

    fn or(&mut self, no_gt: bool) -> Result<Expr> {
        let mut lhs = self.and(no_gt)?;
        while kw_ci(self.cur.peek(), "or") || self.cur.is_punct("||") {
            self.cur.bump();
            let rhs = self.and(no_gt)?;
            lhs = Expr::bin(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self, no_gt: bool) -> Result<Expr> {
        let mut lhs = self.not(no_gt)?;
        while kw_ci(self.cur.peek(), "and") || self.cur.is_punct("&&") || self.cur.is_punct("&")
        {
            self.cur.bump();
            let rhs = self.not(no_gt)?;
            lhs = Expr::bin(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not(&mut self, no_gt: bool) -> Result<Expr> {
        if kw_ci(self.cur.peek(), "not") || self.cur.is_punct("!") {
            self.cur.bump();
            return Ok(Expr::Not(Box::new(self.not(no_gt)?)));
        }
        self.cmp(no_gt)
    }

    fn cmp(&mut self, no_gt: bool) -> Result<Expr> {
        let lhs = self.add()?;
        if self.cur.is_kw("is") {
            self.cur.bump();
            let negated = kw_ci(self.cur.peek(), "not");
            if negated {
                self.cur.bump();
            }
            self.cur.expect_kw("null")?;
            return Ok(Expr::IsNull {
                expr: Box::new(lhs),
                negated,
            });
        }
        let op = match self.cur.peek() {
            Tok::Punct("==") => BinOp::Eq,
            Tok::Punct("!=") => BinOp::Ne,
            Tok::Punct("<") => BinOp::Lt,
            Tok::Punct("<=") => BinOp::Le,
            Tok::Punct(">") if !no_gt => BinOp::Gt,
            Tok::Punct(">=") if !no_gt => BinOp::Ge,
            Tok::Punct("=") => {
                return Err(self.cur.error("`==` (a single `=` is only used in sources)"))
            }
            _ => return Ok(lhs),
        };
        self.cur.bump();
        let rhs = self.add()?;
        Ok(Expr::bin(op, lhs, rhs))
    }

    fn add(&mut self) -> Result<Expr> {
        let mut lhs = self.mul()?;
        loop {
            let op = match self.cur.peek() {
                Tok::Punct("+") => BinOp::Add,
                Tok::Punct("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.cur.bump();
            let rhs = self.mul()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn mul(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.cur.peek() {
                Tok::Punct("*") => BinOp::Mul,
                Tok::Punct("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.cur.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.cur.is_punct("-") {
            if matches!(self.cur.peek_at(1), Tok::Int(_) | Tok::Real(_)) {
                return Ok(Expr::Const(self.constant()?));
            }
            self.cur.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        if self.cur.eat_punct("(") {
            let e = self.expr(false)?;
            self.cur.expect_punct(")")?;
            return Ok(e);
        }
        if self.starts_query() {
            return Ok(Expr::Query(Box::new(self.query(false)?)));
        }
        match self.cur.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                if matches!(self.cur.peek_at(1), Tok::Punct("(")) {
                    let f = AggFn::from_name(&s).ok_or_else(|| {
                        Error::syntax(self.cur.pos(), "aggregate (size, sum, avg, min, max)", format!("`{s}`"))
                    })?;
                    self.cur.bump();
                    self.cur.bump();
                    let arg = self.expr(false)?;
                    self.cur.expect_punct(")")?;
                    return Ok(Expr::Agg(f, Box::new(arg)));
                }
                self.cur.bump();
                let steps = self.steps()?;
                Ok(Expr::Path {
                    head: Head::Name(s),
                    steps,
                })
            }
            Tok::Ref(c, id) if matches!(self.cur.peek_at(1), Tok::Punct(".")) => {
                self.cur.bump();
                let steps = self.steps()?;
                Ok(Expr::Path {
                    head: Head::Ref(c, id),
                    steps,
                })
            }
            _ => match self.constant() {
                Ok(c) => Ok(Expr::Const(c)),
                Err(_) => Err(self.cur.error("expression")),
            },
        }
    }

    fn steps(&mut self) -> Result<Vec<String>> {
        let mut steps = Vec::new();
        while self.cur.eat_punct(".") {
            steps.push(self.segment()?);
        }
        Ok(steps)
    }
}
