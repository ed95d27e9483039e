//! Canonical text form of queries and expressions; re-parses to an equal tree.

use std::fmt::{self, Display, Formatter, Write};

use crate::query::ast::*;
use crate::value::{format_real, quote_str};

impl Display for Const {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Const::Null => f.write_str("null"),
            Const::Bool(b) => write!(f, "{b}"),
            Const::Int(i) => write!(f, "{i}"),
            Const::Real(r) => f.write_str(&format_real(*r)),
            Const::Str(s) => f.write_str(&quote_str(s)),
            Const::Ref(c, id) => write!(f, "{c}#{id}"),
            Const::Hex(h) => write!(f, "0x{h:x}"),
        }
    }
}

impl Display for Head {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Head::Name(n) => f.write_str(n),
            Head::Ref(c, id) => write!(f, "{c}#{id}"),
        }
    }
}

fn write_path(f: &mut Formatter<'_>, head: &Head, steps: &[String]) -> fmt::Result {
    write!(f, "{head}")?;
    for s in steps {
        write!(f, ".{s}")?;
    }
    Ok(())
}

struct Prec<'a>(&'a Expr, bool);

impl Display for Prec<'_> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Path { head, steps } => write_path(f, head, steps),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Not(e) => write!(f, "not {}", Prec(e, e.precedence() < 3)),
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let lp = l.precedence() < p || (op.is_comparison() && l.precedence() == p);
                let rp = r.precedence() <= p;
                write!(f, "{} {} {}", Prec(l, lp), op.symbol(), Prec(r, rp))
            }
            Expr::IsNull { expr, negated } => {
                let kw = if *negated { "is not null" } else { "is null" };
                write!(f, "{} {kw}", Prec(expr, expr.precedence() <= 4))
            }
            Expr::Agg(func, arg) => match arg.as_ref() {
                Expr::Query(q) => write!(f, "{}({q})", func.name()),
                other => write!(f, "{}({other})", func.name()),
            },
            // Parenthesized so a following `<` is not read as a return list.
            Expr::Query(q) => write!(f, "({q})"),
        }
    }
}

impl Display for Restrict {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Restrict::Param(head, steps) => write_path(f, &Head::Name(head.clone()), steps),
            Restrict::Const(c) => write!(f, "{c}"),
        }
    }
}

impl Display for Source {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if let Some(b) = &self.binder {
            write!(f, "{b}:")?;
        }
        match &self.kind {
            SourceKind::Path {
                head,
                steps,
                restrict,
            } => {
                write_path(f, head, steps)?;
                if let Some(r) = restrict {
                    write!(f, " = {r}")?;
                }
                Ok(())
            }
            SourceKind::Literal { rows, names } => {
                f.write_char('{')?;
                for (i, row) in rows.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    if row.len() == 1 {
                        write!(f, "{}", row[0])?;
                    } else {
                        f.write_char('<')?;
                        write_list(f, row)?;
                        f.write_char('>')?;
                    }
                }
                f.write_char('}')?;
                if !names.is_empty() {
                    write!(f, " <{}>", names.join(", "))?;
                }
                Ok(())
            }
        }
    }
}

fn write_list<T: Display>(f: &mut Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{it}")?;
    }
    Ok(())
}

impl Display for Ret {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.name {
            write!(f, "{n} = ")?;
        }
        // A bare `>` would close the return list.
        write!(f, "{}", Prec(&self.expr, self.expr.precedence() <= 4))
    }
}

fn write_stmts(f: &mut Formatter<'_>, stmts: &[Stmt]) -> fmt::Result {
    f.write_char('{')?;
    for (i, s) in stmts.iter().enumerate() {
        if i > 0 {
            f.write_char(' ')?;
        }
        write!(f, "{} := {};", s.var, s.expr)?;
    }
    f.write_char('}')
}

impl Display for Query {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.name {
            write!(f, "{n} = ")?;
        }
        if self.distinct {
            f.write_str("distinct ")?;
        }
        f.write_char('{')?;
        if let Some(b) = &self.blocks {
            f.write_str("begin ")?;
            write_stmts(f, &b.begin)?;
            write!(f, " over {}", self.sources[0])?;
            if !b.before.is_empty() {
                f.write_str(" before ")?;
                write_stmts(f, &b.before)?;
            }
            let pred = self
                .predicate
                .clone()
                .unwrap_or(Expr::Const(Const::Bool(true)));
            write!(f, " where ({pred})")?;
            if !b.after.is_empty() {
                f.write_str(" after ")?;
                write_stmts(f, &b.after)?;
            }
            f.write_str(" end ")?;
            write_stmts(f, &b.end)?;
            f.write_str(" return <")?;
            write_list(f, &self.returns)?;
            return f.write_str(">}");
        }
        write_list(f, &self.sources)?;
        if let Some(p) = &self.predicate {
            write!(f, " | {p}")?;
        }
        f.write_char('}')?;
        if !self.returns.is_empty() {
            f.write_str(" <")?;
            write_list(f, &self.returns)?;
            f.write_char('>')?;
        }
        Ok(())
    }
}
