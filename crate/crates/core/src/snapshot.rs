//! Text snapshots. A snapshot has a `#schema` section of DDL lines, an
//! optional `#defs` section of property and view definitions and an
//! optional `#data` section of item lines:
//!
//! ```text
//! #schema
//! concept Sizes { label: String }
//! #defs
//! property Sizes.short := label == "small"
//! #data
//! Sizes <"small">
//! Sizes#4 <"huge">
//! @next Sizes 6
//! ```
//!
//! An item line without an id takes the next fresh id. Other lines starting
//! with `#` are comments.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::database::{Database, PropertyKind};
use crate::error::{Error, Result};
use crate::query::ast::{Expr, Query};
use crate::query::{parse_data_line, parse_expr, parse_query};
use crate::schema::{parse_ddl, ConceptDef, ConceptId};
use crate::value::{format_real, quote_str, ItemRef, Value};

/// A named definition layered over the schema.
#[derive(Debug, Clone, PartialEq)]
pub enum Definition {
    View { name: String, query: Query },
    Virtual { owner: String, name: String, body: Expr },
    Constraint { owner: String, name: String, body: Expr },
    MultiValued { owner: String, name: String, target: String },
}

impl fmt::Display for Definition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Definition::View { name, query } => write!(f, "view {name} = {query}"),
            Definition::Virtual { owner, name, body } => write!(f, "property {owner}.{name} := {body}"),
            Definition::Constraint { owner, name, body } => {
                write!(f, "constraint {owner}.{name} := {body}")
            }
            Definition::MultiValued { owner, name, target } => write!(f, "mv {owner}.{name} -> {target}"),
        }
    }
}

fn syntax(message: impl Into<String>) -> Error {
    Error::Parse {
        line: 1,
        message: message.into(),
    }
}

fn owner_and_name(text: &str) -> Result<(String, String)> {
    let (owner, name) = text
        .trim()
        .split_once('.')
        .ok_or_else(|| syntax(format!("expected `Concept.name`, found `{}`", text.trim())))?;
    let ok = |s: &str| !s.is_empty() && s.chars().all(crate::lex::is_ident_char);
    if !ok(owner) || !ok(name) {
        return Err(syntax(format!("expected `Concept.name`, found `{}`", text.trim())));
    }
    Ok((owner.to_string(), name.to_string()))
}

/// True for lines handled by [`parse_definition`].
pub fn is_definition(line: &str) -> bool {
    let first = line.split_whitespace().next().unwrap_or("");
    matches!(first, "view" | "property" | "constraint" | "mv")
}

/// Parses `view N = q`, `property C.n := e`, `constraint C.n := e` or `mv C.n -> T`.
pub fn parse_definition(line: &str) -> Result<Definition> {
    let line = line.trim();
    let (kw, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    match kw {
        "view" => {
            let (name, q) = rest
                .split_once('=')
                .ok_or_else(|| syntax("expected `view Name = query`"))?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(crate::lex::is_ident_char) {
                return Err(syntax(format!("bad view name `{name}`")));
            }
            Ok(Definition::View {
                name: name.to_string(),
                query: parse_query(q)?,
            })
        }
        "property" | "constraint" => {
            let (lhs, body) = rest
                .split_once(":=")
                .ok_or_else(|| syntax(format!("expected `{kw} Concept.name := expression`")))?;
            let (owner, name) = owner_and_name(lhs)?;
            let body = parse_expr(body)?;
            Ok(if kw == "property" {
                Definition::Virtual { owner, name, body }
            } else {
                Definition::Constraint { owner, name, body }
            })
        }
        "mv" => {
            let (lhs, target) = rest
                .split_once("->")
                .ok_or_else(|| syntax("expected `mv Concept.name -> Target`"))?;
            let (owner, name) = owner_and_name(lhs)?;
            Ok(Definition::MultiValued {
                owner,
                name,
                target: target.trim().to_string(),
            })
        }
        _ => Err(syntax(format!("unknown definition `{kw}`"))),
    }
}

impl Database {
    pub fn apply_definition(&mut self, def: &Definition) -> Result<()> {
        match def {
            Definition::View { name, query } => self.define_view(name, query.clone()),
            Definition::Virtual { owner, name, body } => {
                let owner = self.schema.id(owner)?;
                self.define_virtual_property(owner, name, body.clone())
            }
            Definition::Constraint { owner, name, body } => {
                let owner = self.schema.id(owner)?;
                self.define_constraint(owner, name, body.clone())
            }
            Definition::MultiValued { owner, name, target } => {
                let (owner, target) = (self.schema.id(owner)?, self.schema.id(target)?);
                self.define_mv_property(owner, name, target).map(|_| ())
            }
        }
    }

    /// Definitions in an order that can be replayed: multi-valued
    /// properties, virtual properties, views, then constraints.
    pub fn definitions(&self) -> Vec<Definition> {
        let name = |c: ConceptId| self.schema.name(c).to_string();
        let mut mv = Vec::new();
        let mut virt = Vec::new();
        let mut cons = Vec::new();
        for p in &self.props {
            match &p.kind {
                PropertyKind::MultiValued { target, .. } => mv.push(Definition::MultiValued {
                    owner: name(p.owner),
                    name: p.name.clone(),
                    target: name(*target),
                }),
                PropertyKind::Virtual(body) => virt.push(Definition::Virtual {
                    owner: name(p.owner),
                    name: p.name.clone(),
                    body: body.clone(),
                }),
                PropertyKind::Constraint(body) => cons.push(Definition::Constraint {
                    owner: name(p.owner),
                    name: p.name.clone(),
                    body: body.clone(),
                }),
            }
        }
        let views = self.views.iter().map(|v| Definition::View {
            name: v.name.clone(),
            query: v.query.clone(),
        });
        mv.into_iter().chain(virt).chain(views).chain(cons).collect()
    }
}

/// A value written as a literal that parses back to the same value.
pub fn literal(db: &Database, v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Real(r) => format_real(*r),
        Value::Str(s) => quote_str(s),
        Value::Ref(r) => db.ref_string(*r),
    }
}

/// Deterministic text of the whole database: concepts in topological
/// order, items in id order.
pub fn save(db: &Database) -> String {
    let mut out = String::from("#schema\n");
    out.push_str(&db.schema.dump());
    let defs = db.definitions();
    if !defs.is_empty() {
        out.push_str("#defs\n");
        for d in defs {
            out.push_str(&d.to_string());
            out.push('\n');
        }
    }
    let mut data = String::new();
    for c in db.schema.topological_order() {
        let name = db.schema.name(c);
        let mut expected = 1;
        for (r, item) in db.store.items(c) {
            let vals: Vec<String> = item.values.iter().map(|v| literal(db, v)).collect();
            if r.id == expected {
                data.push_str(&format!("{name} <{}>\n", vals.join(", ")));
            } else {
                data.push_str(&format!("{name}#{} <{}>\n", r.id, vals.join(", ")));
            }
            expected = r.id + 1;
        }
        let next = db.store.extent_of(c).map_or(1, |e| e.next_id());
        if next != expected {
            data.push_str(&format!("@next {name} {next}\n"));
        }
    }
    if !data.is_empty() {
        out.push_str("#data\n");
        out.push_str(&data);
    }
    out
}

#[derive(PartialEq)]
enum Section {
    Schema,
    Defs,
    Data,
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Parse { message, .. } => Error::Parse { line, message },
        e @ Error::DanglingAt { .. } => e,
        other => Error::Parse {
            line,
            message: other.to_string(),
        },
    }
}

enum DataStmt {
    Item { concept: ConceptId, id: u64, values: Vec<Value> },
    Next { concept: ConceptId, next: u64 },
}

/// Rebuilds a database from [`save`] output. Items may refer to items
/// listed later; every reference must name an item of the snapshot.
pub fn load(text: &str) -> Result<Database> {
    let mut db = Database::new();
    let mut section = Section::Schema;
    let mut ddl: Vec<(usize, ConceptDef)> = Vec::new();
    let mut data: Vec<(usize, DataStmt)> = Vec::new();
    let mut counters: HashMap<ConceptId, u64> = HashMap::new();

    fn flush(db: &mut Database, ddl: &mut Vec<(usize, ConceptDef)>) -> Result<()> {
        if ddl.is_empty() {
            return Ok(());
        }
        let first = ddl[0].0;
        let defs = ddl.drain(..).map(|(_, d)| d).collect();
        db.define_concepts(defs).map(|_| ()).map_err(|e| at_line(first, e))
    }

    for (k, raw) in text.lines().enumerate() {
        let n = k + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let next = match header.trim() {
                "schema" => Some(Section::Schema),
                "defs" => Some(Section::Defs),
                "data" => Some(Section::Data),
                _ => None,
            };
            if let Some(s) = next {
                flush(&mut db, &mut ddl)?;
                section = s;
            }
            continue;
        }
        match section {
            Section::Schema => ddl.push((n, parse_ddl(line).map_err(|e| at_line(n, e))?)),
            Section::Defs => {
                let def = parse_definition(line).map_err(|e| at_line(n, e))?;
                db.apply_definition(&def).map_err(|e| at_line(n, e))?;
            }
            Section::Data => {
                let stmt = parse_data_stmt(&db, line, &mut counters).map_err(|e| at_line(n, e))?;
                data.push((n, stmt));
            }
        }
    }
    flush(&mut db, &mut ddl)?;

    let declared: HashSet<ItemRef> = data
        .iter()
        .filter_map(|(_, s)| match s {
            DataStmt::Item { concept, id, .. } => Some(ItemRef::new(*concept, *id)),
            DataStmt::Next { .. } => None,
        })
        .collect();
    for (n, stmt) in data {
        match stmt {
            DataStmt::Item { concept, id, values } => {
                if let Some(r) = values
                    .iter()
                    .filter_map(Value::as_ref)
                    .find(|r| !declared.contains(r))
                {
                    return Err(Error::DanglingAt {
                        line: n,
                        item: db.ref_string(r),
                    });
                }
                db.store
                    .insert_declared(&db.schema, concept, id, values, &declared)
                    .map_err(|e| at_line(n, e))?;
            }
            DataStmt::Next { concept, next } => db.store.set_next_id(concept, next),
        }
    }
    db.store.recount_uses();
    let all: HashSet<ConceptId> = db.schema.user_concepts().map(|c| c.id).collect();
    db.check_constraints(&all)?;
    Ok(db)
}

fn parse_data_stmt(db: &Database, line: &str, counters: &mut HashMap<ConceptId, u64>) -> Result<DataStmt> {
    if let Some(rest) = line.strip_prefix("@next") {
        let mut parts = rest.split_whitespace();
        let (Some(name), Some(next), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(syntax("expected `@next Concept N`"));
        };
        let concept = db.schema.id(name)?;
        let next: u64 = next
            .parse()
            .map_err(|_| syntax(format!("bad id counter `{next}`")))?;
        let counter = counters.entry(concept).or_insert(1);
        *counter = (*counter).max(next);
        return Ok(DataStmt::Next { concept, next });
    }
    let dl = parse_data_line(line)?;
    let concept = db.mutable_concept(&dl.concept)?;
    let counter = counters.entry(concept).or_insert(1);
    let id = dl.id.unwrap_or(*counter);
    if id < *counter {
        return Err(syntax(format!("{}#{id} is listed out of order", dl.concept)));
    }
    *counter = id + 1;
    let values = dl
        .values
        .iter()
        .map(|c| db.const_value(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(DataStmt::Item { concept, id, values })
}
