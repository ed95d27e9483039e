//! Random databases, predicates and the brute-force oracles used to check
//! the engine against them. The oracles read raw item values and schema
//! intents only; they never call path resolution or canonical semantics.

use std::collections::BTreeMap;

use codm::schema::{ConceptDef, DimDef};
use codm::{ConceptId, Database, ItemRef, Value};
use rand::seq::SliceRandom;
use rand::Rng;

pub const WORDS: &[&str] = &["a", "b", "c", "d"];

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub concepts: usize,
    pub dims: usize,
    pub items: usize,
}

pub const SMALL: Shape = Shape {
    concepts: 5,
    dims: 3,
    items: 20,
};

fn random_primitive(rng: &mut impl Rng) -> &'static str {
    if rng.gen_bool(0.5) {
        "Integer"
    } else {
        "String"
    }
}

/// A value for a slot of `domain`, or `None` when no valid value exists.
pub fn random_value(rng: &mut impl Rng, db: &Database, domain: ConceptId, nullable: bool) -> Option<Value> {
    if nullable && rng.gen_bool(0.2) {
        return Some(Value::Null);
    }
    match domain {
        ConceptId::INTEGER => Some(Value::Int(rng.gen_range(0..5))),
        ConceptId::STRING => Some(Value::str(*WORDS.choose(rng).unwrap())),
        c => {
            let live: Vec<ItemRef> = db.store().items(c).map(|(r, _)| r).collect();
            match live.choose(rng) {
                Some(r) => Some(Value::Ref(*r)),
                None if nullable => Some(Value::Null),
                None => None,
            }
        }
    }
}

/// Values for a new item of `c`; direct dimensions start out null.
pub fn random_row(rng: &mut impl Rng, db: &Database, c: ConceptId) -> Option<Vec<Value>> {
    let concept = db.schema().concept(c).unwrap().clone();
    concept
        .dims
        .iter()
        .map(|d| {
            if d.direct {
                Some(Value::Null)
            } else {
                random_value(rng, db, d.domain, d.nullable)
            }
        })
        .collect()
}

/// Concepts `C0..Cn`, each dimension pointing at a primitive or an earlier
/// concept; some concepts get a nullable direct self dimension or local scope.
pub fn random_db(rng: &mut impl Rng, shape: Shape) -> Database {
    let mut db = Database::new();
    let n = rng.gen_range(1..=shape.concepts);
    for k in 0..n {
        let name = format!("C{k}");
        let ndims = rng.gen_range(1..=shape.dims);
        let mut dims = Vec::new();
        for j in 0..ndims {
            let domain = if k > 0 && rng.gen_bool(0.55) {
                format!("C{}", rng.gen_range(0..k))
            } else {
                random_primitive(rng).to_string()
            };
            let mut d = DimDef::new(format!("d{j}"), domain);
            if rng.gen_bool(0.3) {
                d = d.nullable();
            }
            dims.push(d);
        }
        if ndims < shape.dims && rng.gen_bool(0.15) {
            dims.push(DimDef::new("up", name.as_str()).nullable().direct());
        }
        let mut def = ConceptDef::new(name, dims);
        if k + 1 < n && rng.gen_bool(0.2) {
            def = def.local();
        }
        db.define_concepts(vec![def]).unwrap();
    }
    let concepts: Vec<ConceptId> = db.schema().user_concepts().map(|c| c.id).collect();
    for &c in &concepts {
        for _ in 0..rng.gen_range(0..=shape.items) {
            if let Some(row) = random_row(rng, &db, c) {
                db.insert(c, row).unwrap();
            }
        }
        let direct: Vec<String> = db
            .schema()
            .concept(c)
            .unwrap()
            .dims
            .iter()
            .filter(|d| d.direct)
            .map(|d| d.name.clone())
            .collect();
        let items: Vec<ItemRef> = db.store().items(c).map(|(r, _)| r).collect();
        for dim in direct {
            for &r in &items {
                if rng.gen_bool(0.5) {
                    let to = *items.choose(rng).unwrap();
                    if to != r {
                        db.update(r, &dim, to.into()).unwrap();
                    }
                }
            }
        }
    }
    db
}

pub fn user_concepts(db: &Database) -> Vec<ConceptId> {
    db.schema().user_concepts().map(|c| c.id).collect()
}

fn join(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a}.{b}"),
    }
}

/// Primitive key names of `c`, by recursion over the intents.
pub fn oracle_keys(db: &Database, c: ConceptId) -> Vec<String> {
    let schema = db.schema();
    let mut out = Vec::new();
    for d in &schema.concept(c).unwrap().dims {
        if d.direct {
            continue;
        }
        if schema.is_primitive(d.domain) {
            out.push(d.label().to_string());
        } else {
            for k in oracle_keys(db, d.domain) {
                out.push(join(d.label(), &k));
            }
        }
    }
    out
}

/// The flat tuple of `r`, substituting each reference by its superitem's
/// values through nested lookups.
pub fn oracle_tuple(db: &Database, r: ItemRef) -> BTreeMap<String, Value> {
    let schema = db.schema();
    let item = db.store().item(schema, r).unwrap();
    let concept = schema.concept(r.concept).unwrap();
    let mut out = BTreeMap::new();
    for (d, v) in concept.dims.iter().zip(&item.values) {
        if d.direct {
            continue;
        }
        if schema.is_primitive(d.domain) {
            out.insert(d.label().to_string(), v.clone());
            continue;
        }
        match v {
            Value::Ref(sup) => {
                for (k, x) in oracle_tuple(db, *sup) {
                    out.insert(join(d.label(), &k), x);
                }
            }
            _ => {
                for k in oracle_keys(db, d.domain) {
                    out.insert(join(d.label(), &k), Value::Null);
                }
            }
        }
    }
    out
}

/// Follows dimension names from `r` by reading slots directly.
pub fn oracle_walk(db: &Database, r: ItemRef, path: &[String]) -> Value {
    let schema = db.schema();
    let mut cur = Value::Ref(r);
    for step in path {
        let Value::Ref(at) = cur else {
            return Value::Null;
        };
        let concept = schema.concept(at.concept).unwrap();
        let k = concept.dims.iter().position(|d| &d.name == step).unwrap();
        cur = db.store().item(schema, at).unwrap().values[k].clone();
    }
    cur
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }

    fn holds(self, o: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Cmp::Eq => o == Equal,
            Cmp::Ne => o != Equal,
            Cmp::Lt => o == Less,
            Cmp::Le => o != Greater,
            Cmp::Gt => o == Greater,
            Cmp::Ge => o != Less,
        }
    }
}

/// A predicate over one binder with its own evaluation rules: comparisons
/// involving null are false, `is null` tests the walked value.
#[derive(Debug, Clone)]
pub enum Pred {
    Cmp(Vec<String>, Cmp, Value),
    IsNull(Vec<String>, bool),
    Not(Box<Pred>),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
}

/// A random upward path from `c` through non-direct dimensions.
pub fn random_path(rng: &mut impl Rng, db: &Database, c: ConceptId) -> (Vec<String>, ConceptId) {
    let schema = db.schema();
    let mut at = c;
    let mut path = Vec::new();
    loop {
        let dims: Vec<_> = schema.concept(at).unwrap().dims.iter().filter(|d| !d.direct).collect();
        let d = dims.choose(rng).unwrap();
        path.push(d.name.clone());
        at = d.domain;
        if schema.is_primitive(at) || rng.gen_bool(0.3) {
            return (path, at);
        }
    }
}

pub fn random_pred(rng: &mut impl Rng, db: &Database, c: ConceptId, depth: usize) -> Pred {
    if depth > 0 && rng.gen_bool(0.4) {
        let a = Box::new(random_pred(rng, db, c, depth - 1));
        return match rng.gen_range(0..3) {
            0 => Pred::Not(a),
            1 => Pred::And(a, Box::new(random_pred(rng, db, c, depth - 1))),
            _ => Pred::Or(a, Box::new(random_pred(rng, db, c, depth - 1))),
        };
    }
    let (path, target) = random_path(rng, db, c);
    if rng.gen_bool(0.15) {
        return Pred::IsNull(path, rng.gen_bool(0.5));
    }
    let ops = [Cmp::Eq, Cmp::Ne, Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge];
    match target {
        ConceptId::INTEGER => Pred::Cmp(path, *ops.choose(rng).unwrap(), Value::Int(rng.gen_range(-1..6))),
        ConceptId::STRING => Pred::Cmp(path, *ops.choose(rng).unwrap(), Value::str(*WORDS.choose(rng).unwrap())),
        t => {
            let items: Vec<ItemRef> = db.store().items(t).map(|(r, _)| r).collect();
            match items.choose(rng) {
                Some(r) => Pred::Cmp(path, *[Cmp::Eq, Cmp::Ne].choose(rng).unwrap(), Value::Ref(*r)),
                None => Pred::IsNull(path, rng.gen_bool(0.5)),
            }
        }
    }
}

fn literal(db: &Database, v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Str(s) => format!("{s:?}"),
        Value::Ref(r) => db.ref_string(*r),
        other => panic!("no literal for {other:?}"),
    }
}

impl Pred {
    pub fn text(&self, db: &Database, binder: &str) -> String {
        let path = |p: &[String]| format!("{binder}.{}", p.join("."));
        match self {
            Pred::Cmp(p, op, v) => format!("{} {} {}", path(p), op.symbol(), literal(db, v)),
            Pred::IsNull(p, false) => format!("{} is null", path(p)),
            Pred::IsNull(p, true) => format!("{} is not null", path(p)),
            Pred::Not(a) => format!("not ({})", a.text(db, binder)),
            Pred::And(a, b) => format!("({}) and ({})", a.text(db, binder), b.text(db, binder)),
            Pred::Or(a, b) => format!("({}) or ({})", a.text(db, binder), b.text(db, binder)),
        }
    }

    pub fn eval(&self, db: &Database, r: ItemRef) -> bool {
        match self {
            Pred::Cmp(p, op, v) => {
                let x = oracle_walk(db, r, p);
                match (&x, v) {
                    (Value::Int(a), Value::Int(b)) => op.holds(a.cmp(b)),
                    (Value::Str(a), Value::Str(b)) => op.holds(a.cmp(b)),
                    (Value::Ref(a), Value::Ref(b)) => op.holds(if a == b {
                        std::cmp::Ordering::Equal
                    } else {
                        std::cmp::Ordering::Less
                    }),
                    _ => false,
                }
            }
            Pred::IsNull(p, negated) => oracle_walk(db, r, p).is_null() != *negated,
            Pred::Not(a) => !a.eval(db, r),
            Pred::And(a, b) => a.eval(db, r) && b.eval(db, r),
            Pred::Or(a, b) => a.eval(db, r) || b.eval(db, r),
        }
    }
}

/// Every `(superconcept, subconcept)` pair joined by exactly one non-direct
/// dimension of the subconcept.
pub fn merge_edges(db: &Database) -> Vec<(ConceptId, ConceptId, String)> {
    let schema = db.schema();
    let mut out = Vec::new();
    for c in schema.user_concepts() {
        for d in &c.dims {
            let shared = c.dims.iter().filter(|x| x.domain == d.domain && !x.direct).count();
            if !d.direct && shared == 1 && schema.concept(d.domain).unwrap().is_user() {
                out.push((d.domain, c.id, d.name.clone()));
            }
        }
    }
    out
}

/// Full-scan referential integrity and usage counts, computed from raw slots.
pub fn integrity_problems(db: &Database) -> Vec<String> {
    let schema = db.schema();
    let mut counts: BTreeMap<ItemRef, usize> = BTreeMap::new();
    let mut problems = Vec::new();
    for c in schema.user_concepts() {
        for (r, item) in db.store().items(c.id) {
            for (d, v) in c.dims.iter().zip(&item.values) {
                match v {
                    Value::Ref(x) => {
                        *counts.entry(*x).or_default() += 1;
                        if x.concept != d.domain || !db.store().is_live(*x) {
                            problems.push(format!("{r}.{} -> {x}", d.name));
                        }
                    }
                    Value::Null if !d.nullable => problems.push(format!("{r}.{} null", d.name)),
                    _ => {}
                }
            }
        }
    }
    for c in schema.user_concepts() {
        for (r, item) in db.store().items(c.id) {
            let expected = counts.get(&r).copied().unwrap_or(0);
            if item.uses() != expected {
                problems.push(format!("{r}: uses {} != {expected}", item.uses()));
            }
        }
    }
    problems
}
