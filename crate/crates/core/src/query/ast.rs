//! Syntax tree of the query language. Names are kept unresolved; binding to
//! concepts, binders and parameters happens at evaluation time.

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub name: Option<String>,
    pub distinct: bool,
    pub sources: Vec<Source>,
    pub predicate: Option<Expr>,
    pub returns: Vec<Ret>,
    /// Present for block-structured queries; then `sources` holds the single
    /// `over` source, `predicate` the `where` expression and `returns` the
    /// `return` list.
    pub blocks: Option<Blocks>,
}

impl Query {
    pub fn simple(sources: Vec<Source>) -> Self {
        Query {
            name: None,
            distinct: false,
            sources,
            predicate: None,
            returns: Vec::new(),
            blocks: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub binder: Option<String>,
    pub kind: SourceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    /// Concept, view, restricted concept (`C.x.y = p`) or a collection-valued
    /// property such as `i.m`.
    Path {
        head: Head,
        steps: Vec<String>,
        restrict: Option<Restrict>,
    },
    /// Inline collection; `names` may be empty.
    Literal { rows: Vec<Vec<Const>>, names: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Name(String),
    Ref(String, u64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Restrict {
    /// A parameter, binder or binder path such as `t.p`.
    Param(String, Vec<String>),
    Const(Const),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Blocks {
    pub begin: Vec<Stmt>,
    pub before: Vec<Stmt>,
    pub after: Vec<Stmt>,
    pub end: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub var: String,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ret {
    pub name: Option<String>,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Const {
    Null,
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
    Ref(String, u64),
    Hex(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "or",
            BinOp::And => "and",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFn {
    Size,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFn {
    pub fn name(self) -> &'static str {
        match self {
            AggFn::Size => "size",
            AggFn::Sum => "sum",
            AggFn::Avg => "avg",
            AggFn::Min => "min",
            AggFn::Max => "max",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "size" | "count" => AggFn::Size,
            "sum" => AggFn::Sum,
            "avg" => AggFn::Avg,
            "min" => AggFn::Min,
            "max" => AggFn::Max,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Const),
    /// `a`, `a.b.c` or `Concept#1.b`.
    Path { head: Head, steps: Vec<String> },
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    IsNull { expr: Box<Expr>, negated: bool },
    Agg(AggFn, Box<Expr>),
    Query(Box<Query>),
}

impl Expr {
    pub fn ident(name: &str) -> Self {
        Expr::Path {
            head: Head::Name(name.to_string()),
            steps: Vec::new(),
        }
    }

    /// `a.b.c` from a dotted string.
    pub fn path(dotted: &str) -> Self {
        let mut parts = dotted.split('.').map(str::to_string);
        let head = parts.next().unwrap_or_default();
        Expr::Path {
            head: Head::Name(head),
            steps: parts.collect(),
        }
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Self {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn int(v: i64) -> Self {
        Expr::Const(Const::Int(v))
    }

    pub fn str(v: &str) -> Self {
        Expr::Const(Const::Str(v.to_string()))
    }

    pub(crate) fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Not(_) => 3,
            Expr::IsNull { .. } => 4,
            Expr::Neg(_) => 7,
            _ => 8,
        }
    }

    /// Visits every path head in the expression, nested queries included.
    pub fn for_each_head<'a>(&'a self, f: &mut dyn FnMut(&'a Head, &'a [String])) {
        match self {
            Expr::Const(_) => {}
            Expr::Path { head, steps } => f(head, steps),
            Expr::Neg(e) | Expr::Not(e) | Expr::Agg(_, e) => e.for_each_head(f),
            Expr::IsNull { expr, .. } => expr.for_each_head(f),
            Expr::Binary(_, l, r) => {
                l.for_each_head(f);
                r.for_each_head(f);
            }
            Expr::Query(q) => q.for_each_head(f),
        }
    }
}

impl Query {
    pub fn for_each_head<'a>(&'a self, f: &mut dyn FnMut(&'a Head, &'a [String])) {
        for s in &self.sources {
            if let SourceKind::Path { head, steps, .. } = &s.kind {
                f(head, steps);
            }
        }
        if let Some(p) = &self.predicate {
            p.for_each_head(f);
        }
        for r in &self.returns {
            r.expr.for_each_head(f);
        }
        if let Some(b) = &self.blocks {
            for s in b.begin.iter().chain(&b.before).chain(&b.after).chain(&b.end) {
                s.expr.for_each_head(f);
            }
        }
    }
}

pub const RESERVED: &[&str] = &[
    "in", "from", "begin", "over", "before", "where", "after", "end", "return", "true", "false",
    "null", "is", "not", "and", "or", "distinct",
];

pub fn is_reserved(s: &str) -> bool {
    RESERVED.contains(&s) || matches!(s.to_ascii_lowercase().as_str(), "and" | "or" | "not")
}
