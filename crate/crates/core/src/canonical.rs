//! Canonical (flat) semantics: items with every reference replaced by the
//! primitive values reachable from it.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::database::Database;
use crate::error::{Error, Result};
use crate::schema::ConceptId;
use crate::value::{format_real, quote_str, ItemRef, Value};

/// Primitive path name to value (or null).
pub type FlatTuple = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalRelation {
    pub concept: ConceptId,
    /// Path names in sorted order.
    pub keys: Vec<String>,
    pub tuples: Vec<FlatTuple>,
}

impl CanonicalRelation {
    /// Tuples as value rows in key order, sorted (nulls last).
    pub fn sorted_rows(&self) -> Vec<Vec<Value>> {
        let mut rows: Vec<Vec<Value>> = self
            .tuples
            .iter()
            .map(|t| self.keys.iter().map(|k| t[k].clone()).collect())
            .collect();
        rows.sort();
        rows
    }

    /// Header of path names, then one tab-separated line per tuple.
    pub fn dump(&self) -> String {
        let mut out = self.keys.join("\t");
        out.push('\n');
        for row in self.sorted_rows() {
            let cells: Vec<String> = row.iter().map(render).collect();
            let _ = writeln!(out, "{}", cells.join("\t"));
        }
        out
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Real(r) => format_real(*r),
        Value::Str(s) => quote_str(s),
        Value::Ref(r) => r.to_string(),
    }
}

fn prefixed(parent: &str, path: &str) -> String {
    if path.is_empty() {
        parent.to_string()
    } else {
        format!("{parent}.{path}")
    }
}

impl Database {
    pub fn canonical_item(&self, r: ItemRef) -> Result<FlatTuple> {
        self.store.item(&self.schema, r)?;
        let mut out = FlatTuple::new();
        for path in self.schema.canonical_syntax(r.concept)? {
            let v = self.store.get_super(&self.schema, r, &path)?;
            out.insert(self.schema.path_name(&path), v);
        }
        Ok(out)
    }

    /// Canonical tuples of the extent of `c` in insertion order; the bottom
    /// concept yields the database semantics.
    pub fn concept_semantics(&self, c: ConceptId) -> Result<CanonicalRelation> {
        if c == ConceptId::BOTTOM {
            return Ok(self.database_semantics());
        }
        let concept = self.schema.concept(c)?;
        if !concept.is_user() {
            return Err(Error::InvalidPath(format!(
                "`{}` has no stored extent",
                concept.name
            )));
        }
        let keys: Vec<String> = self
            .schema
            .canonical_syntax(c)?
            .iter()
            .map(|p| self.schema.path_name(p))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        sorted.dedup();
        let tuples = self
            .store
            .items(c)
            .map(|(r, _)| self.canonical_item(r))
            .collect::<Result<_>>()?;
        Ok(CanonicalRelation {
            concept: c,
            keys: sorted,
            tuples,
        })
    }

    /// Items inherited by the bottom concept: every item of every bottom
    /// parent, with its own paths filled in and null elsewhere.
    pub fn database_semantics(&self) -> CanonicalRelation {
        let parents = self.schema.bottom_parents();
        let mut keys = Vec::new();
        let mut blocks = Vec::new();
        for &p in &parents {
            let name = self.schema.name(p).to_string();
            let paths = self.schema.canonical_syntax(p).expect("live concept");
            let names: Vec<String> = paths
                .iter()
                .map(|x| prefixed(&name, &self.schema.path_name(x)))
                .collect();
            keys.extend(names.iter().cloned());
            blocks.push((p, paths, names));
        }
        keys.sort();
        keys.dedup();
        let blank: FlatTuple = keys.iter().map(|k| (k.clone(), Value::Null)).collect();
        let mut tuples = Vec::new();
        for (p, paths, names) in &blocks {
            for (r, _) in self.store.items(*p) {
                let mut t = blank.clone();
                for (path, key) in paths.iter().zip(names) {
                    let v = self
                        .store
                        .get_super(&self.schema, r, path)
                        .expect("store invariants hold");
                    t.insert(key.clone(), v);
                }
                tuples.push(t);
            }
        }
        CanonicalRelation {
            concept: ConceptId::BOTTOM,
            keys,
            tuples,
        }
    }
}

/// Equality of database semantics as multisets, references ignored.
pub fn semantic_equal(a: &Database, b: &Database) -> Result<bool> {
    let (x, y) = (a.database_semantics(), b.database_semantics());
    if x.keys != y.keys {
        return Err(Error::IncomparableSchemas);
    }
    Ok(x.sorted_rows() == y.sorted_rows())
}
