use std::fmt::Write as _;

use crate::database::Database;
use crate::error::{Error, Result};
use crate::query::ast::Expr;
use crate::query::eval::{Evaluator, Params};
use crate::schema::{ConceptId, DimPath};
use crate::value::{ItemRef, Value};

/// How the items of a level are attached to their parent node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expansion {
    /// Every item of the level concept; only valid for the first level.
    All,
    /// Items whose dotted `path` leads to the parent item.
    Subitems(Vec<String>),
    /// Items reached from the parent by a path, multi-valued or virtual property.
    Property(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub concept: ConceptId,
    /// Dotted paths shown on each node.
    pub show: Vec<String>,
    pub expansion: Expansion,
    pub filter: Option<Expr>,
}

impl Level {
    pub fn new(concept: ConceptId, expansion: Expansion) -> Self {
        Level {
            concept,
            show: Vec::new(),
            expansion,
            filter: None,
        }
    }

    pub fn show(mut self, path: &str) -> Self {
        self.show.push(path.to_string());
        self
    }

    pub fn filter(mut self, e: Expr) -> Self {
        self.filter = Some(e);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TreeSpec {
    pub levels: Vec<Level>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// `None` for the root.
    pub level: Option<usize>,
    pub item: Option<ItemRef>,
    pub label: String,
    pub props: Vec<(String, Value)>,
    pub children: Vec<Node>,
}

impl Node {
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(Node::count).sum::<usize>()
    }

    /// Indented text, two spaces per depth, `label [prop=value …]` per node.
    pub fn dump(&self, db: &Database) -> String {
        let mut out = String::new();
        self.dump_into(db, 0, &mut out);
        out
    }

    fn dump_into(&self, db: &Database, depth: usize, out: &mut String) {
        let _ = write!(out, "{}{}", "  ".repeat(depth), self.label);
        if !self.props.is_empty() {
            let props: Vec<String> = self
                .props
                .iter()
                .map(|(k, v)| format!("{k}={}", db.display_value(v)))
                .collect();
            let _ = write!(out, " [{}]", props.join(" "));
        }
        out.push('\n');
        for c in &self.children {
            c.dump_into(db, depth + 1, out);
        }
    }
}

enum Rule {
    All,
    Subitems(DimPath),
    Property(Expr),
}

fn invalid(msg: String) -> Error {
    Error::InvalidTreeSpec(msg)
}

fn compile(db: &Database, spec: &TreeSpec) -> Result<Vec<Rule>> {
    let schema = db.schema();
    let mut rules = Vec::new();
    for (k, level) in spec.levels.iter().enumerate() {
        let name = schema.name(level.concept);
        if !schema.concept(level.concept).is_ok_and(|c| c.is_user()) {
            return Err(invalid(format!("level {k}: `{name}` has no items")));
        }
        let rule = match (&level.expansion, k) {
            (Expansion::All, 0) => Rule::All,
            (Expansion::All, _) => {
                return Err(invalid(format!("level {k}: only the first level lists all items")))
            }
            (_, 0) => return Err(invalid("the first level must list all items".into())),
            (Expansion::Subitems(path), _) => {
                let parent = spec.levels[k - 1].concept;
                let p = schema
                    .resolve_path(level.concept, path)
                    .map_err(|e| invalid(format!("level {k}: {e}")))?;
                if p.target != parent {
                    return Err(invalid(format!(
                        "level {k}: `{name}.{}` does not lead to `{}`",
                        path.join("."),
                        schema.name(parent)
                    )));
                }
                Rule::Subitems(p)
            }
            (Expansion::Property(path), _) => {
                let parent = spec.levels[k - 1].concept;
                let connects = match schema.resolve_path(parent, path) {
                    Ok(p) => p.target == level.concept,
                    Err(_) => {
                        let (last, init) = path.split_last().ok_or_else(|| {
                            invalid(format!("level {k}: empty property path"))
                        })?;
                        let owner = schema.resolve_path(parent, init).map(|p| p.target);
                        match owner {
                            Ok(o) => {
                                db.mv_link(o, last)
                                    .is_some_and(|(_, t)| t == level.concept)
                                    || db.virtual_body(o, last).is_some()
                            }
                            Err(_) => false,
                        }
                    }
                };
                if !connects {
                    return Err(invalid(format!(
                        "level {k}: `{}.{}` does not lead to `{name}`",
                        schema.name(parent),
                        path.join(".")
                    )));
                }
                Rule::Property(Expr::path(&format!("this.{}", path.join("."))))
            }
        };
        rules.push(rule);
    }
    Ok(rules)
}

struct Builder<'a, 'b> {
    db: &'a Database,
    spec: &'a TreeSpec,
    rules: Vec<Rule>,
    depth: usize,
    ev: Evaluator<'b>,
}

impl<'a: 'b, 'b> Builder<'a, 'b> {
    fn candidates(&mut self, k: usize, parent: Option<ItemRef>) -> Result<Vec<ItemRef>> {
        let (schema, store) = (self.db.schema(), self.db.store());
        let concept = self.spec.levels[k].concept;
        match (&self.rules[k], parent) {
            (Rule::All, _) => store.extent(schema, concept),
            (Rule::Subitems(path), Some(p)) => {
                let mut out = Vec::new();
                for (r, _) in store.items(concept) {
                    if store.get_super(schema, r, path)? == Value::Ref(p) {
                        out.push(r);
                    }
                }
                Ok(out)
            }
            (Rule::Property(e), Some(p)) => {
                let mut out = Vec::new();
                for v in self.ev.values_on(p, e)? {
                    match v {
                        Value::Ref(r) if r.concept == concept => out.push(r),
                        other => {
                            return Err(invalid(format!(
                                "level {k}: expansion of {} yields `{}`, not an item of `{}`",
                                self.db.ref_string(p),
                                self.db.display_value(&other),
                                schema.name(concept)
                            )))
                        }
                    }
                }
                Ok(out)
            }
            _ => unreachable!("validated by compile"),
        }
    }

    fn children(&mut self, k: usize, parent: Option<ItemRef>) -> Result<Vec<Node>> {
        if k >= self.depth {
            return Ok(Vec::new());
        }
        let level = &self.spec.levels[k];
        let mut out = Vec::new();
        for r in self.candidates(k, parent)? {
            if let Some(f) = &level.filter {
                if !self.ev.test_on(r, f)? {
                    continue;
                }
            }
            let props = level
                .show
                .iter()
                .map(|p| Ok((p.clone(), self.ev.value_on(r, &Expr::path(p))?)))
                .collect::<Result<Vec<_>>>()?;
            let children = self.children(k + 1, Some(r))?;
            out.push(Node {
                level: Some(k),
                item: Some(r),
                label: self.db.item_label(r),
                props,
                children,
            });
        }
        Ok(out)
    }
}

/// Builds the tree below the virtual top item, materializing at most
/// `depth` levels.
pub fn hierarchy_tree(db: &Database, spec: &TreeSpec, depth: usize) -> Result<Node> {
    let rules = compile(db, spec)?;
    let params = Params::new();
    let mut b = Builder {
        db,
        spec,
        rules,
        depth: depth.min(spec.levels.len()),
        ev: Evaluator::new(db, &params),
    };
    let children = if spec.levels.is_empty() {
        Vec::new()
    } else {
        b.children(0, None)?
    };
    Ok(Node {
        level: None,
        item: None,
        label: "⊤".to_string(),
        props: Vec::new(),
        children,
    })
}
