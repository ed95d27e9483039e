//! Nested-loop evaluator. Sources are iterated in declared order, the
//! predicate filters each combination and the returns are computed per
//! surviving combination.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use crate::database::Database;
use crate::error::{Error, Result};
use crate::query::ast::*;
use crate::schema::ConceptId;
use crate::value::{ItemRef, Value};

pub type Params = HashMap<String, Value>;

/// Nesting bound for virtual properties that reach themselves at run time.
const MAX_VIRTUAL_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    /// Concept of the first non-null value, if any.
    pub domain: Option<ConceptId>,
}

/// A derived concept: named columns and ordered rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub name: Option<String>,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, k: usize) -> Vec<Value> {
        self.rows.iter().map(|r| r[k].clone()).collect()
    }

    /// References in the first column, skipping other values.
    pub fn refs(&self) -> Vec<ItemRef> {
        self.rows.iter().filter_map(|r| r.first()?.as_ref()).collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Val {
    One(Value),
    Row(Rc<Vec<(String, Value)>>),
    Many(Vec<Value>),
}

struct Frame {
    name: Option<String>,
    val: Val,
    /// Implicit binder of a property body; its members are reachable by bare name.
    implicit: bool,
    level: usize,
}

pub struct Evaluator<'a> {
    db: &'a Database,
    params: &'a Params,
    frames: Vec<Frame>,
    blocks: Vec<HashMap<String, Value>>,
    level: usize,
    virtual_depth: usize,
    views: HashMap<String, Rc<ResultSet>>,
}

fn type_err(msg: impl Into<String>) -> Error {
    Error::Type(msg.into())
}

fn domain_of(v: &Value) -> Option<ConceptId> {
    match v {
        Value::Null => None,
        Value::Bool(_) => Some(ConceptId::BOOLEAN),
        Value::Int(_) => Some(ConceptId::INTEGER),
        Value::Real(_) => Some(ConceptId::REAL),
        Value::Str(_) => Some(ConceptId::STRING),
        Value::Ref(r) => Some(r.concept),
    }
}

fn kind_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "Boolean",
        Value::Int(_) => "Integer",
        Value::Real(_) => "Real",
        Value::Str(_) => "String",
        Value::Ref(_) => "reference",
    }
}

/// Order of two non-null values; `Err` for incomparable kinds.
fn compare(a: &Value, b: &Value, ordering: bool) -> Result<Ordering> {
    use Value::*;
    let out = match (a, b) {
        (Int(x), Int(y)) => x.cmp(y),
        (Int(_) | Real(_), Int(_) | Real(_)) => {
            let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            x.partial_cmp(&y).unwrap_or_else(|| x.total_cmp(&y))
        }
        (Str(x), Str(y)) => x.cmp(y),
        (Bool(x), Bool(y)) => x.cmp(y),
        (Ref(x), Ref(y)) if !ordering => {
            if x == y {
                Ordering::Equal
            } else {
                Ordering::Less
            }
        }
        _ => {
            return Err(type_err(format!(
                "cannot compare {} with {}",
                kind_name(a),
                kind_name(b)
            )))
        }
    };
    Ok(out)
}

/// Equality used by restrictions and filters: numeric kinds compare by value, null never matches.
pub(crate) fn same_value(a: &Value, b: &Value) -> bool {
    if a.is_null() || b.is_null() {
        return false;
    }
    matches!(compare(a, b, false), Ok(Ordering::Equal))
}

fn arith(op: BinOp, a: &Value, b: &Value) -> Result<Value> {
    use Value::*;
    if a.is_null() || b.is_null() {
        return Ok(Null);
    }
    match (a, b) {
        (Int(x), Int(y)) => {
            let r = match op {
                BinOp::Add => x.checked_add(*y),
                BinOp::Sub => x.checked_sub(*y),
                BinOp::Mul => x.checked_mul(*y),
                _ => {
                    if *y == 0 {
                        return Err(Error::DivisionByZero);
                    }
                    x.checked_div(*y)
                }
            };
            r.map(Int)
                .ok_or_else(|| type_err(format!("integer overflow in {x} {} {y}", op.symbol())))
        }
        (Int(_) | Real(_), Int(_) | Real(_)) => {
            let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            Ok(Real(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                _ => {
                    if y == 0.0 {
                        return Err(Error::DivisionByZero);
                    }
                    x / y
                }
            }))
        }
        _ => Err(type_err(format!(
            "`{}` needs numbers, got {} and {}",
            op.symbol(),
            kind_name(a),
            kind_name(b)
        ))),
    }
}

/// Aggregates over a collection; nulls are skipped except by `size`.
pub fn aggregate(f: AggFn, values: &[Value]) -> Result<Value> {
    if f == AggFn::Size {
        return Ok(Value::Int(values.len() as i64));
    }
    let vals: Vec<&Value> = values.iter().filter(|v| !v.is_null()).collect();
    match f {
        AggFn::Size => unreachable!(),
        AggFn::Sum => {
            let mut acc = Value::Int(0);
            for v in vals {
                if !matches!(v, Value::Int(_) | Value::Real(_)) {
                    return Err(type_err(format!("sum over {}", kind_name(v))));
                }
                acc = arith(BinOp::Add, &acc, v)?;
            }
            Ok(acc)
        }
        AggFn::Avg => {
            if vals.is_empty() {
                return Ok(Value::Null);
            }
            let mut total = 0.0;
            for v in &vals {
                total += v
                    .as_f64()
                    .ok_or_else(|| type_err(format!("avg over {}", kind_name(v))))?;
            }
            Ok(Value::Real(total / vals.len() as f64))
        }
        AggFn::Min | AggFn::Max => {
            let mut best: Option<&Value> = None;
            for v in vals {
                best = Some(match best {
                    None => {
                        compare(v, v, true)?;
                        v
                    }
                    Some(b) => {
                        let o = compare(v, b, true)?;
                        let take = if f == AggFn::Min { o.is_lt() } else { o.is_gt() };
                        if take {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            Ok(best.cloned().unwrap_or(Value::Null))
        }
    }
}

fn truth(v: &Val) -> Result<bool> {
    match v {
        Val::One(Value::Bool(b)) => Ok(*b),
        Val::One(Value::Null) => Ok(false),
        Val::One(other) => Err(type_err(format!("expected a Boolean, got {}", kind_name(other)))),
        Val::Row(r) if r.len() == 1 => truth(&Val::One(r[0].1.clone())),
        _ => Err(type_err("expected a Boolean, got a collection")),
    }
}

fn to_value(v: Val) -> Result<Value> {
    match v {
        Val::One(v) => Ok(v),
        Val::Row(r) if r.len() == 1 => Ok(r[0].1.clone()),
        Val::Row(_) => Err(type_err("a tuple cannot be used as a single value")),
        Val::Many(_) => Err(type_err(
            "a collection cannot be used as a single value; apply an aggregate",
        )),
    }
}

fn unique_names(names: Vec<String>) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let taken: HashSet<String> = names.iter().cloned().collect();
    let mut out = Vec::with_capacity(names.len());
    for n in names {
        let count = seen.entry(n.clone()).or_insert(0);
        *count += 1;
        if *count == 1 {
            out.push(n);
            continue;
        }
        let mut k = *count;
        let mut cand = format!("{n}_{k}");
        while taken.contains(&cand) || out.contains(&cand) {
            k += 1;
            cand = format!("{n}_{k}");
        }
        out.push(cand);
    }
    out
}

fn ret_name(r: &Ret) -> String {
    if let Some(n) = &r.name {
        return n.clone();
    }
    match &r.expr {
        Expr::Path { steps, .. } if !steps.is_empty() => steps.last().unwrap().clone(),
        Expr::Path {
            head: Head::Name(n),
            ..
        } => n.clone(),
        Expr::Path {
            head: Head::Ref(c, _),
            ..
        } => c.clone(),
        Expr::Agg(f, _) => f.name().to_string(),
        _ => "expr".to_string(),
    }
}

/// Path heads outside nested queries.
fn top_heads<'e>(e: &'e Expr, out: &mut Vec<&'e Head>) {
    match e {
        Expr::Path { head, .. } => out.push(head),
        Expr::Neg(x) | Expr::Not(x) | Expr::Agg(_, x) => top_heads(x, out),
        Expr::IsNull { expr, .. } => top_heads(expr, out),
        Expr::Binary(_, l, r) => {
            top_heads(l, out);
            top_heads(r, out);
        }
        Expr::Const(_) | Expr::Query(_) => {}
    }
}

impl<'a> Evaluator<'a> {
    pub fn new(db: &'a Database, params: &'a Params) -> Self {
        Evaluator {
            db,
            params,
            frames: Vec::new(),
            blocks: Vec::new(),
            level: 0,
            virtual_depth: 0,
            views: HashMap::new(),
        }
    }

    /// Evaluates `body` with `r` as the implicit item (`this`).
    pub fn value_on(&mut self, r: ItemRef, body: &Expr) -> Result<Value> {
        let frames = std::mem::replace(
            &mut self.frames,
            vec![Frame {
                name: Some("this".to_string()),
                val: Val::One(Value::Ref(r)),
                implicit: true,
                level: 0,
            }],
        );
        let blocks = std::mem::take(&mut self.blocks);
        let level = std::mem::replace(&mut self.level, 0);
        let out = self.eval(body).and_then(to_value);
        self.frames = frames;
        self.blocks = blocks;
        self.level = level;
        out
    }

    /// Values of `body` on `r` as a list: a collection yields its members,
    /// a single value one element, null none.
    pub(crate) fn values_on(&mut self, r: ItemRef, body: &Expr) -> Result<Vec<Value>> {
        let frames = std::mem::replace(
            &mut self.frames,
            vec![Frame {
                name: Some("this".to_string()),
                val: Val::One(Value::Ref(r)),
                implicit: true,
                level: 0,
            }],
        );
        let blocks = std::mem::take(&mut self.blocks);
        let level = std::mem::replace(&mut self.level, 0);
        let out = self.eval(body).and_then(|v| match v {
            Val::Many(vs) => Ok(vs.into_iter().filter(|v| !v.is_null()).collect()),
            Val::One(Value::Null) => Ok(Vec::new()),
            other => to_value(other).map(|v| vec![v]),
        });
        self.frames = frames;
        self.blocks = blocks;
        self.level = level;
        out
    }

    /// Truth of a condition on `r`; null counts as false.
    pub fn test_on(&mut self, r: ItemRef, body: &Expr) -> Result<bool> {
        let v = self.value_on(r, body)?;
        truth(&Val::One(v))
    }

    pub fn eval_query(&mut self, q: &Query) -> Result<ResultSet> {
        let frames = self.frames.len();
        let blocks = self.blocks.len();
        self.level += 1;
        let out = if q.blocks.is_some() {
            self.block_query(q)
        } else {
            self.simple_query(q)
        };
        self.level -= 1;
        self.frames.truncate(frames);
        self.blocks.truncate(blocks);
        let (names, mut rows) = out?;
        if q.distinct {
            let mut seen = HashSet::new();
            rows.retain(|r| seen.insert(r.clone()));
        }
        let columns = unique_names(names)
            .into_iter()
            .enumerate()
            .map(|(k, name)| Column {
                name,
                domain: rows.iter().find_map(|r| domain_of(&r[k])),
            })
            .collect();
        Ok(ResultSet {
            name: q.name.clone(),
            columns,
            rows,
        })
    }

    fn simple_query(&mut self, q: &Query) -> Result<(Vec<String>, Vec<Vec<Value>>)> {
        let mut rows = Vec::new();
        let mut binder_names = None;
        self.product(q, 0, &mut rows, &mut binder_names)?;
        Ok((self.column_names(q, binder_names)?, rows))
    }

    fn column_names(&mut self, q: &Query, found: Option<Vec<String>>) -> Result<Vec<String>> {
        if !q.returns.is_empty() {
            return Ok(q.returns.iter().map(ret_name).collect());
        }
        if let Some(n) = found {
            return Ok(n);
        }
        let mut out = Vec::new();
        for s in &q.sources {
            out.extend(self.static_binder_columns(s)?);
        }
        Ok(out)
    }

    /// Column names of a binder when no row was produced.
    fn static_binder_columns(&mut self, s: &Source) -> Result<Vec<String>> {
        Ok(match &s.kind {
            SourceKind::Literal { names, rows } => {
                let width = rows.first().map_or(1, Vec::len);
                if !names.is_empty() && (width > 1 || s.binder.is_none()) {
                    names.clone()
                } else if width > 1 {
                    (1..=width).map(|k| format!("_{k}")).collect()
                } else {
                    vec![s.binder.clone().unwrap_or_else(|| "value".into())]
                }
            }
            SourceKind::Path { head, steps, .. } => {
                if let Head::Name(n) = head {
                    if steps.is_empty() && !self.in_scope(n) && self.db.view(n).is_some() {
                        let rs = self.view_result(n)?;
                        if rs.columns.len() > 1 {
                            return Ok(rs.columns.iter().map(|c| c.name.clone()).collect());
                        }
                    }
                }
                vec![self.binder_column(s)]
            }
        })
    }

    fn binder_column(&self, s: &Source) -> String {
        if let Some(b) = &s.binder {
            return b.clone();
        }
        match &s.kind {
            SourceKind::Path { head, steps, restrict } => match head {
                Head::Name(n) if restrict.is_some() || steps.is_empty() => n.clone(),
                Head::Name(_) | Head::Ref(..) if !steps.is_empty() => steps.last().unwrap().clone(),
                Head::Name(n) => n.clone(),
                Head::Ref(c, _) => c.clone(),
            },
            SourceKind::Literal { .. } => "value".into(),
        }
    }

    /// Values of this level's binders, tuples expanded into their fields.
    fn binder_row(&self, q: &Query) -> (Vec<String>, Vec<Value>) {
        let mut names = Vec::new();
        let mut vals = Vec::new();
        let frames: Vec<&Frame> = self.frames.iter().filter(|f| f.level == self.level).collect();
        for (f, s) in frames.iter().zip(&q.sources) {
            match &f.val {
                Val::Row(fields) if fields.len() > 1 || s.binder.is_none() => {
                    for (n, v) in fields.iter() {
                        names.push(n.clone());
                        vals.push(v.clone());
                    }
                }
                Val::Row(fields) => {
                    names.push(self.binder_column(s));
                    vals.push(fields[0].1.clone());
                }
                Val::One(v) => {
                    names.push(self.binder_column(s));
                    vals.push(v.clone());
                }
                Val::Many(_) => unreachable!("binders hold single values"),
            }
        }
        (names, vals)
    }

    fn product(
        &mut self,
        q: &Query,
        k: usize,
        rows: &mut Vec<Vec<Value>>,
        names: &mut Option<Vec<String>>,
    ) -> Result<()> {
        if k == q.sources.len() {
            if let Some(p) = &q.predicate {
                if !truth(&self.eval(p)?)? {
                    return Ok(());
                }
            }
            rows.push(self.emit(q, names)?);
            return Ok(());
        }
        let src = &q.sources[k];
        for val in self.source_items(src)? {
            self.frames.push(Frame {
                name: src.binder.clone(),
                val,
                implicit: false,
                level: self.level,
            });
            let r = self.product(q, k + 1, rows, names);
            self.frames.pop();
            r?;
        }
        Ok(())
    }

    fn emit(&mut self, q: &Query, names: &mut Option<Vec<String>>) -> Result<Vec<Value>> {
        if q.returns.is_empty() {
            let (n, v) = self.binder_row(q);
            if names.is_none() {
                *names = Some(n);
            }
            return Ok(v);
        }
        q.returns
            .iter()
            .map(|r| self.eval(&r.expr).and_then(to_value))
            .collect()
    }

    fn block_query(&mut self, q: &Query) -> Result<(Vec<String>, Vec<Vec<Value>>)> {
        let blocks = q.blocks.as_ref().expect("block query");
        let src = q
            .sources
            .first()
            .ok_or_else(|| type_err("block query without an `over` source"))?;
        self.blocks.push(HashMap::new());
        self.run(&blocks.begin)?;

        // Returns that mention only block variables form a single final row.
        let mut vars: HashSet<&str> = HashSet::new();
        for s in blocks.begin.iter().chain(&blocks.before).chain(&blocks.after).chain(&blocks.end) {
            vars.insert(&s.var);
        }
        let mut heads = Vec::new();
        for r in &q.returns {
            top_heads(&r.expr, &mut heads);
        }
        let mut mentions_binder = false;
        for r in &q.returns {
            r.expr.for_each_head(&mut |h, _| {
                if let (Head::Name(n), Some(b)) = (h, &src.binder) {
                    if n == b {
                        mentions_binder = true;
                    }
                }
            });
        }
        let final_row = !heads.is_empty()
            && !mentions_binder
            && heads
                .iter()
                .all(|h| matches!(h, Head::Name(n) if vars.contains(n.as_str())));

        let mut rows = Vec::new();
        let mut names = None;
        for val in self.source_items(src)? {
            self.frames.push(Frame {
                name: src.binder.clone(),
                val,
                implicit: false,
                level: self.level,
            });
            let step = (|| -> Result<()> {
                self.run(&blocks.before)?;
                let keep = match &q.predicate {
                    Some(p) => truth(&self.eval(p)?)?,
                    None => true,
                };
                if keep {
                    self.run(&blocks.after)?;
                    if !final_row {
                        let row = self.emit(q, &mut names)?;
                        rows.push(row);
                    }
                }
                Ok(())
            })();
            self.frames.pop();
            step?;
        }
        self.run(&blocks.end)?;
        if final_row {
            let row = q
                .returns
                .iter()
                .map(|r| self.eval(&r.expr).and_then(to_value))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok((self.column_names(q, names)?, rows))
    }

    fn run(&mut self, stmts: &[Stmt]) -> Result<()> {
        for s in stmts {
            let v = self.eval(&s.expr).and_then(to_value)?;
            self.blocks
                .last_mut()
                .expect("block scope")
                .insert(s.var.clone(), v);
        }
        Ok(())
    }

    // ---- sources --------------------------------------------------------

    fn in_scope(&self, n: &str) -> bool {
        self.blocks.iter().any(|b| b.contains_key(n))
            || self.frames.iter().any(|f| f.name.as_deref() == Some(n))
            || self.params.contains_key(n)
    }

    fn view_result(&mut self, name: &str) -> Result<Rc<ResultSet>> {
        if let Some(rs) = self.views.get(name) {
            return Ok(rs.clone());
        }
        let view = self.db.view(name).expect("checked view");
        // Views see neither the caller's binders nor its parameters.
        let params = Params::new();
        let mut inner = Evaluator::new(self.db, &params);
        inner.virtual_depth = self.virtual_depth;
        let rs = Rc::new(inner.eval_query(&view.query)?);
        self.views.insert(name.to_string(), rs.clone());
        Ok(rs)
    }

    fn const_value(&self, c: &Const) -> Result<Value> {
        Ok(match c {
            Const::Null => Value::Null,
            Const::Bool(b) => Value::Bool(*b),
            Const::Int(i) => Value::Int(*i),
            Const::Real(r) => Value::Real(*r),
            Const::Str(s) => Value::Str(s.clone()),
            Const::Ref(c, id) => Value::Ref(ItemRef::new(self.db.schema.id(c)?, *id)),
            Const::Hex(h) => Value::Int(*h as i64),
        })
    }

    fn literal_items(&self, rows: &[Vec<Const>], names: &[String]) -> Result<Vec<Val>> {
        let width = rows.first().map_or(0, Vec::len);
        let mut kinds: Vec<Option<Value>> = vec![None; width];
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != width || (!names.is_empty() && names.len() != width) {
                return Err(Error::DomainViolation {
                    slot: format!("literal tuple of {} values", row.len()),
                    expected: format!("{} values", if names.is_empty() { width } else { names.len() }),
                });
            }
            let vals = row
                .iter()
                .map(|c| self.const_value(c))
                .collect::<Result<Vec<_>>>()?;
            for (k, v) in vals.iter().enumerate() {
                if v.is_null() {
                    continue;
                }
                match &kinds[k] {
                    None => kinds[k] = Some(v.clone()),
                    Some(first) => {
                        if compare(first, v, false).is_err() {
                            let slot = names.get(k).cloned().unwrap_or_else(|| format!("_{}", k + 1));
                            return Err(Error::DomainViolation {
                                slot,
                                expected: kind_name(first).to_string(),
                            });
                        }
                    }
                }
            }
            for r in vals.iter().filter_map(Value::as_ref) {
                self.db.store.item(&self.db.schema, r)?;
            }
            out.push(if !names.is_empty() {
                Val::Row(Rc::new(names.iter().cloned().zip(vals).collect()))
            } else if width == 1 {
                Val::One(vals.into_iter().next().unwrap())
            } else {
                Val::Row(Rc::new(
                    vals.into_iter()
                        .enumerate()
                        .map(|(k, v)| (format!("_{}", k + 1), v))
                        .collect(),
                ))
            });
        }
        Ok(out)
    }

    fn source_items(&mut self, src: &Source) -> Result<Vec<Val>> {
        let (head, steps, restrict) = match &src.kind {
            SourceKind::Literal { rows, names } => return self.literal_items(rows, names),
            SourceKind::Path {
                head,
                steps,
                restrict,
            } => (head, steps, restrict),
        };
        let scoped = match head {
            Head::Ref(..) => true,
            Head::Name(n) => self.in_scope(n),
        };
        if scoped {
            if restrict.is_some() {
                return Err(Error::InvalidPath(
                    "a restriction needs a concept or view source".into(),
                ));
            }
            return Ok(match self.eval_path(head, steps)? {
                Val::Many(vs) => vs.into_iter().map(Val::One).collect(),
                Val::One(Value::Null) => Vec::new(),
                other => vec![other],
            });
        }
        let Head::Name(name) = head else { unreachable!() };
        if let Some(c) = self.db.schema.lookup(name) {
            let extent = self.db.store.extent(&self.db.schema, c)?;
            if steps.is_empty() && restrict.is_none() {
                return Ok(extent.into_iter().map(|r| Val::One(Value::Ref(r))).collect());
            }
            let path = self.db.schema.resolve_path(c, steps)?;
            let want = self.restriction_value(name, steps, restrict, path.target)?;
            let mut out = Vec::new();
            for r in extent {
                let v = self.db.store.get_super(&self.db.schema, r, &path)?;
                if same_value(&v, &want) {
                    out.push(Val::One(Value::Ref(r)));
                }
            }
            return Ok(out);
        }
        if self.db.view(name).is_some() {
            let rs = self.view_result(name)?;
            let items: Vec<Val> = rs
                .rows
                .iter()
                .map(|row| {
                    if row.len() == 1 {
                        Val::One(row[0].clone())
                    } else {
                        Val::Row(Rc::new(
                            rs.columns.iter().map(|c| c.name.clone()).zip(row.iter().cloned()).collect(),
                        ))
                    }
                })
                .collect();
            if steps.is_empty() && restrict.is_none() {
                return Ok(items);
            }
            let target = match rs.columns.first().and_then(|c| c.domain) {
                Some(c) if rs.columns.len() == 1 => self.db.schema.resolve_path(c, steps)?.target,
                _ => {
                    return Err(Error::InvalidPath(format!(
                        "view `{name}` does not hold items of one concept"
                    )))
                }
            };
            let want = self.restriction_value(name, steps, restrict, target)?;
            let mut out = Vec::new();
            for it in items {
                let v = to_value(self.navigate(it.clone(), steps)?)?;
                if same_value(&v, &want) {
                    out.push(it);
                }
            }
            return Ok(out);
        }
        Err(Error::UnknownConcept(name.clone()))
    }

    /// Value a restricted source must reach along its path.
    fn restriction_value(
        &mut self,
        name: &str,
        steps: &[String],
        restrict: &Option<Restrict>,
        target: ConceptId,
    ) -> Result<Value> {
        match restrict {
            Some(Restrict::Param(p, psteps)) => {
                to_value(self.eval_path(&Head::Name(p.clone()), psteps)?)
            }
            Some(Restrict::Const(Const::Hex(h))) if !self.db.schema.is_primitive(target) => {
                Ok(Value::Ref(ItemRef::new(target, *h)))
            }
            Some(Restrict::Const(c)) => self.const_value(c),
            None => {
                // The innermost enclosing binder holding an item of the path's domain.
                let mut found: Option<(usize, Vec<Value>)> = None;
                for f in self.frames.iter().rev() {
                    if let Val::One(Value::Ref(r)) = &f.val {
                        if r.concept == target {
                            match &mut found {
                                None => found = Some((f.level, vec![Value::Ref(*r)])),
                                Some((lvl, vs)) if *lvl == f.level => vs.push(Value::Ref(*r)),
                                Some(_) => break,
                            }
                        }
                    }
                }
                match found {
                    Some((_, vs)) if vs.len() == 1 => Ok(vs.into_iter().next().unwrap()),
                    _ => Err(Error::AmbiguousRestriction(format!(
                        "{{{name}.{}}}",
                        steps.join(".")
                    ))),
                }
            }
        }
    }

    // ---- expressions ----------------------------------------------------

    pub(crate) fn eval(&mut self, e: &Expr) -> Result<Val> {
        Ok(match e {
            Expr::Const(c) => Val::One(self.const_value(c)?),
            Expr::Path { head, steps } => self.eval_path(head, steps)?,
            Expr::Neg(x) => {
                let v = to_value(self.eval(x)?)?;
                Val::One(match v {
                    Value::Null => Value::Null,
                    Value::Int(i) => Value::Int(
                        i.checked_neg()
                            .ok_or_else(|| type_err(format!("integer overflow in -({i})")))?,
                    ),
                    Value::Real(r) => Value::Real(-r),
                    other => return Err(type_err(format!("cannot negate {}", kind_name(&other)))),
                })
            }
            Expr::Not(x) => Val::One(Value::Bool(!truth(&self.eval(x)?)?)),
            Expr::IsNull { expr, negated } => {
                let null = matches!(self.eval(expr)?, Val::One(Value::Null));
                Val::One(Value::Bool(null != *negated))
            }
            Expr::Binary(op, l, r) => Val::One(self.binary(*op, l, r)?),
            Expr::Agg(f, arg) => {
                let values = match arg.as_ref() {
                    Expr::Query(q) => {
                        let rs = self.eval_query(q)?;
                        if *f == AggFn::Size {
                            return Ok(Val::One(Value::Int(rs.rows.len() as i64)));
                        }
                        if rs.columns.len() != 1 {
                            return Err(type_err(format!(
                                "`{}` needs a single-column query, got {} columns",
                                f.name(),
                                rs.columns.len()
                            )));
                        }
                        rs.column(0)
                    }
                    other => match self.eval(other)? {
                        Val::Many(vs) => vs,
                        _ => {
                            return Err(type_err(format!(
                                "`{}` needs a collection argument",
                                f.name()
                            )))
                        }
                    },
                };
                Val::One(aggregate(*f, &values)?)
            }
            Expr::Query(_) => {
                return Err(type_err(
                    "a nested query can only be consumed by an aggregate",
                ))
            }
        })
    }

    fn binary(&mut self, op: BinOp, l: &Expr, r: &Expr) -> Result<Value> {
        match op {
            BinOp::And => {
                let v = truth(&self.eval(l)?)? && truth(&self.eval(r)?)?;
                return Ok(Value::Bool(v));
            }
            BinOp::Or => {
                let v = truth(&self.eval(l)?)? || truth(&self.eval(r)?)?;
                return Ok(Value::Bool(v));
            }
            _ => {}
        }
        if matches!(op, BinOp::Eq | BinOp::Ne) {
            // Hex constants stand for the identifier of whatever item they meet.
            let hex = match (l, r) {
                (Expr::Const(Const::Hex(h)), other) | (other, Expr::Const(Const::Hex(h))) => {
                    Some((*h, other))
                }
                _ => None,
            };
            if let Some((h, other)) = hex {
                let v = to_value(self.eval(other)?)?;
                if let Value::Ref(x) = v {
                    return Ok(Value::Bool((x.id == h) == (op == BinOp::Eq)));
                }
            }
        }
        let a = to_value(self.eval(l)?)?;
        let b = to_value(self.eval(r)?)?;
        if op.is_comparison() {
            if a.is_null() || b.is_null() {
                return Ok(Value::Bool(false));
            }
            let o = compare(&a, &b, !matches!(op, BinOp::Eq | BinOp::Ne))?;
            return Ok(Value::Bool(match op {
                BinOp::Eq => o.is_eq(),
                BinOp::Ne => o.is_ne(),
                BinOp::Lt => o.is_lt(),
                BinOp::Le => o.is_le(),
                BinOp::Gt => o.is_gt(),
                _ => o.is_ge(),
            }));
        }
        arith(op, &a, &b)
    }

    fn eval_path(&mut self, head: &Head, steps: &[String]) -> Result<Val> {
        let n = match head {
            Head::Ref(c, id) => {
                let r = ItemRef::new(self.db.schema.id(c)?, *id);
                return self.navigate(Val::One(Value::Ref(r)), steps);
            }
            Head::Name(n) => n,
        };
        if let Some(v) = self.blocks.iter().rev().find_map(|b| b.get(n)) {
            return self.navigate(Val::One(v.clone()), steps);
        }
        if let Some(f) = self.frames.iter().rev().find(|f| f.name.as_deref() == Some(n)) {
            return self.navigate(f.val.clone(), steps);
        }
        if let Some(v) = self.params.get(n) {
            return self.navigate(Val::One(v.clone()), steps);
        }
        // `T.d` names the binder iterating concept T.
        let by_concept = self.frames.iter().rev().find(|f| match &f.val {
            Val::One(Value::Ref(r)) => self.db.schema.name(r.concept) == n,
            _ => false,
        });
        if let Some(f) = by_concept {
            return self.navigate(f.val.clone(), steps);
        }
        let mut segs = Vec::with_capacity(steps.len() + 1);
        segs.push(n.clone());
        segs.extend_from_slice(steps);
        let member = self
            .frames
            .iter()
            .rev()
            .filter(|f| f.implicit || f.name.is_none())
            .find(|f| self.has_member(&f.val, &segs))
            .map(|f| f.val.clone());
        if let Some(v) = member {
            return self.navigate(v, &segs);
        }
        if self.blocks.is_empty() {
            Err(Error::UnknownParameter(n.clone()))
        } else {
            Err(Error::UnboundBlockVariable(n.clone()))
        }
    }

    fn has_member(&self, v: &Val, segs: &[String]) -> bool {
        match v {
            Val::One(Value::Ref(r)) => {
                self.db.schema.match_dims(r.concept, segs).is_some()
                    || self.db.property(r.concept, &segs[0]).is_some()
            }
            Val::Row(fields) => fields.iter().any(|(n, _)| n == &segs[0]),
            _ => false,
        }
    }

    fn navigate(&mut self, start: Val, segs: &[String]) -> Result<Val> {
        let db = self.db;
        let schema = &db.schema;
        let mut cur = start;
        let mut i = 0;
        while i < segs.len() {
            let r = match cur {
                Val::One(Value::Null) => return Ok(Val::One(Value::Null)),
                Val::One(Value::Ref(r)) => r,
                Val::Row(fields) => {
                    let v = fields
                        .iter()
                        .find(|(n, _)| n == &segs[i])
                        .map(|(_, v)| v.clone())
                        .ok_or_else(|| Error::UnknownProperty(segs[i].clone()))?;
                    cur = Val::One(v);
                    i += 1;
                    continue;
                }
                Val::One(other) => {
                    return Err(Error::InvalidPath(format!(
                        "step `{}` continues past a {} value",
                        segs[i],
                        kind_name(&other)
                    )))
                }
                Val::Many(_) => {
                    return Err(type_err(format!(
                        "step `{}` applied to a collection",
                        segs[i]
                    )))
                }
            };
            if let Some((chain, used)) = schema.match_dims(r.concept, &segs[i..]) {
                let mut v = Value::Ref(r);
                for name in &chain {
                    let Value::Ref(at) = v else { break };
                    let c = schema.concept(at.concept)?;
                    let (k, _) = c.dim(name).expect("matched dimension");
                    v = self.db.store.item(schema, at)?.values[k].clone();
                }
                cur = Val::One(v);
                i += used;
                continue;
            }
            if let Some(body) = self.db.virtual_body(r.concept, &segs[i]) {
                if self.virtual_depth >= MAX_VIRTUAL_DEPTH {
                    return Err(Error::CycleDetected(format!(
                        "virtual property `{}` reaches itself",
                        segs[i]
                    )));
                }
                self.virtual_depth += 1;
                let v = self.value_on(r, body);
                self.virtual_depth -= 1;
                cur = Val::One(v?);
                i += 1;
                continue;
            }
            if let Some((link, _)) = self.db.mv_link(r.concept, &segs[i]) {
                if i + 1 < segs.len() {
                    return Err(type_err(format!(
                        "multi-valued property `{}` must be the last step",
                        segs[i]
                    )));
                }
                let targets = self.db.mv_targets(link, r);
                return Ok(Val::Many(targets.into_iter().map(Value::Ref).collect()));
            }
            return Err(Error::UnknownProperty(format!(
                "{}.{}",
                schema.name(r.concept),
                segs[i]
            )));
        }
        Ok(cur)
    }
}
