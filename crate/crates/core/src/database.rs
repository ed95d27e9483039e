//! A database: schema, extents and the named definitions layered on top of
//! them (views, virtual properties, constraints and multi-valued properties).

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::query::ast::{Const, Expr, Head, Query};
use crate::query::eval::{Evaluator, Params, ResultSet};
use crate::query::parse_query;
use crate::schema::{ConceptDef, ConceptId, DimDef, Direction, Schema};
use crate::store::{ref_string, DeletionReport, Store};
use crate::value::{format_real, ItemRef, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub name: String,
    pub query: Query,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropertyKind {
    /// Computed on every read from the owning item.
    Virtual(Expr),
    /// Boolean condition every item of the owner must satisfy.
    Constraint(Expr),
    /// Reverse reading of a hidden link concept `{src: owner, tgt: target}`.
    MultiValued { link: ConceptId, target: ConceptId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyDef {
    pub owner: ConceptId,
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Debug, Clone, Default)]
pub struct Database {
    pub(crate) schema: Schema,
    pub(crate) store: Store,
    pub(crate) views: Vec<View>,
    pub(crate) props: Vec<PropertyDef>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn view(&self, name: &str) -> Option<&View> {
        self.views.iter().find(|v| v.name == name)
    }

    pub fn properties(&self) -> &[PropertyDef] {
        &self.props
    }

    pub fn property(&self, owner: ConceptId, name: &str) -> Option<&PropertyDef> {
        self.props.iter().find(|p| p.owner == owner && p.name == name)
    }

    pub(crate) fn virtual_body(&self, owner: ConceptId, name: &str) -> Option<&Expr> {
        match self.property(owner, name).map(|p| &p.kind) {
            Some(PropertyKind::Virtual(e)) => Some(e),
            _ => None,
        }
    }

    pub(crate) fn mv_link(&self, owner: ConceptId, name: &str) -> Option<(ConceptId, ConceptId)> {
        match self.property(owner, name).map(|p| &p.kind) {
            Some(PropertyKind::MultiValued { link, target }) => Some((*link, *target)),
            _ => None,
        }
    }

    pub fn concept_id(&self, name: &str) -> Result<ConceptId> {
        self.schema.id(name)
    }

    /// Resolves `Concept#id` text.
    pub fn parse_ref(&self, text: &str) -> Result<ItemRef> {
        let (c, id) = text
            .rsplit_once('#')
            .ok_or_else(|| Error::UnknownItem(text.to_string()))?;
        let id: u64 = id.parse().map_err(|_| Error::UnknownItem(text.to_string()))?;
        Ok(ItemRef::new(self.schema.id(c)?, id))
    }

    pub fn ref_string(&self, r: ItemRef) -> String {
        ref_string(&self.schema, r)
    }

    /// A literal as a value; references are resolved by concept name only.
    pub fn const_value(&self, c: &Const) -> Result<Value> {
        Ok(match c {
            Const::Null => Value::Null,
            Const::Bool(b) => Value::Bool(*b),
            Const::Int(i) => Value::Int(*i),
            Const::Real(r) => Value::Real(*r),
            Const::Str(s) => Value::Str(s.clone()),
            Const::Ref(c, id) => Value::Ref(ItemRef::new(self.schema.id(c)?, *id)),
            Const::Hex(h) => Value::Int(*h as i64),
        })
    }

    /// `Concept#id (v)` with the first non-null primitive found by walking
    /// dimensions in intent order; just `Concept#id` when there is none.
    pub fn item_label(&self, r: ItemRef) -> String {
        let base = self.ref_string(r);
        let mut seen = HashSet::new();
        match self.first_primitive(r, &mut seen) {
            Some(v) => format!("{base} ({})", self.display_value(&v)),
            None => base,
        }
    }

    fn first_primitive(&self, r: ItemRef, seen: &mut HashSet<ItemRef>) -> Option<Value> {
        if !seen.insert(r) {
            return None;
        }
        let item = self.store.item(&self.schema, r).ok()?;
        for v in &item.values {
            match v {
                Value::Null => {}
                Value::Ref(sup) => {
                    if let Some(found) = self.first_primitive(*sup, seen) {
                        return Some(found);
                    }
                }
                other => return Some(other.clone()),
            }
        }
        None
    }

    /// Human rendering: strings unquoted, references as item labels.
    pub fn display_value(&self, v: &Value) -> String {
        match v {
            Value::Null => "null".into(),
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Real(x) => format_real(*x),
            Value::Str(s) => s.clone(),
            Value::Ref(r) => self.item_label(*r),
        }
    }

    fn check_name_free(&self, name: &str) -> Result<()> {
        if self.schema.lookup(name).is_some() || self.view(name).is_some() {
            return Err(Error::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    /// A stored concept by name; views are rejected as immutable.
    pub fn mutable_concept(&self, name: &str) -> Result<ConceptId> {
        if self.view(name).is_some() {
            return Err(Error::ViewImmutable(name.to_string()));
        }
        let id = self.schema.id(name)?;
        if !self.schema.concept(id)?.is_user() {
            return Err(Error::InvalidConcept(format!("`{name}` has no stored items")));
        }
        Ok(id)
    }

    pub fn define_concept(&mut self, name: &str, dims: Vec<DimDef>) -> Result<ConceptId> {
        self.check_name_free(name)?;
        self.schema.define_concept(name, dims)
    }

    pub fn define_concepts(&mut self, defs: Vec<ConceptDef>) -> Result<Vec<ConceptId>> {
        for d in &defs {
            self.check_name_free(&d.name)?;
        }
        self.schema.define_concepts(defs)
    }

    // ---- mutation -------------------------------------------------------

    pub fn insert(&mut self, c: ConceptId, values: Vec<Value>) -> Result<ItemRef> {
        let touched = HashSet::from([c]);
        self.guarded(&touched, |db| db.store.insert(&db.schema, c, values))
    }

    /// Inserts with an explicit id, which must not be below the next fresh id.
    pub fn insert_with_id(&mut self, c: ConceptId, id: u64, values: Vec<Value>) -> Result<ItemRef> {
        let touched = HashSet::from([c]);
        self.guarded(&touched, |db| db.store.insert_with_id(&db.schema, c, id, values))
    }

    /// Inserts into a concept given by name (views are refused).
    pub fn insert_named(&mut self, name: &str, values: Vec<Value>) -> Result<ItemRef> {
        let c = self.mutable_concept(name)?;
        self.insert(c, values)
    }

    pub fn update(&mut self, r: ItemRef, dim: &str, value: Value) -> Result<()> {
        let touched = HashSet::from([r.concept]);
        self.guarded(&touched, |db| db.store.update(&db.schema, r, dim, value))
    }

    pub fn delete(&mut self, r: ItemRef) -> Result<DeletionReport> {
        if self.constraints().next().is_none() {
            return self.store.delete(&self.schema, r);
        }
        let before = self.store.clone();
        let report = self.store.delete(&self.schema, r)?;
        let touched: HashSet<ConceptId> = report
            .deleted
            .iter()
            .chain(report.nulled.iter().map(|(o, _)| o))
            .map(|x| x.concept)
            .collect();
        if let Err(e) = self.check_constraints(&touched) {
            self.store = before;
            return Err(e);
        }
        Ok(report)
    }

    pub fn run_gc(&mut self) -> Vec<ItemRef> {
        self.store.run_gc(&self.schema)
    }

    /// Full-scan integrity report; empty when the store is consistent.
    pub fn verify(&self) -> Vec<String> {
        self.store.verify(&self.schema)
    }

    fn constraints(&self) -> impl Iterator<Item = (&PropertyDef, &Expr)> {
        self.props.iter().filter_map(|p| match &p.kind {
            PropertyKind::Constraint(e) => Some((p, e)),
            _ => None,
        })
    }

    /// Runs a store mutation, undoing it when a dependent constraint fails.
    fn guarded<T>(
        &mut self,
        touched: &HashSet<ConceptId>,
        f: impl FnOnce(&mut Self) -> Result<T>,
    ) -> Result<T> {
        let relevant = self
            .constraints()
            .any(|(p, e)| self.constraint_deps(p.owner, e).iter().any(|c| touched.contains(c)));
        if !relevant {
            return f(self);
        }
        let before = self.store.clone();
        let out = f(self)?;
        if let Err(e) = self.check_constraints(touched) {
            self.store = before;
            return Err(e);
        }
        Ok(out)
    }

    /// Concepts whose mutation may change the outcome of a constraint: the
    /// owner and its superconcepts, concepts named in the body (and in
    /// virtual bodies it may reach), and link concepts of involved owners.
    fn constraint_deps(&self, owner: ConceptId, body: &Expr) -> HashSet<ConceptId> {
        let mut deps = HashSet::new();
        let mut names = HashSet::new();
        collect_names(body, &mut names);
        for p in &self.props {
            if let PropertyKind::Virtual(e) = &p.kind {
                collect_names(e, &mut names);
            }
        }
        let mut stack = vec![owner];
        for n in &names {
            if let Some(c) = self.schema.lookup(n) {
                stack.push(c);
            }
            if let Some(v) = self.view(n) {
                v.query.for_each_head(&mut |h, _| {
                    if let Head::Name(x) = h {
                        if let Some(c) = self.schema.lookup(x) {
                            deps.insert(c);
                        }
                    }
                });
            }
        }
        while let Some(c) = stack.pop() {
            if deps.insert(c) {
                if let Ok(sup) = self.schema.neighbors(c, Direction::Super) {
                    stack.extend(sup);
                }
            }
        }
        let links: Vec<ConceptId> = self
            .props
            .iter()
            .filter_map(|p| match p.kind {
                PropertyKind::MultiValued { link, .. } => Some(link),
                _ => None,
            })
            .collect();
        deps.extend(links);
        deps
    }

    pub(crate) fn check_constraints(&self, touched: &HashSet<ConceptId>) -> Result<()> {
        for (p, body) in self.constraints() {
            if !self.constraint_deps(p.owner, body).iter().any(|c| touched.contains(c)) {
                continue;
            }
            self.check_constraint(p, body)?;
        }
        Ok(())
    }

    fn check_constraint(&self, p: &PropertyDef, body: &Expr) -> Result<()> {
        let params = Params::new();
        let mut ev = Evaluator::new(self, &params);
        for (r, _) in self.store.items(p.owner) {
            if !ev.test_on(r, body)? {
                return Err(Error::ConstraintViolation(format!(
                    "{}.{} on {}",
                    self.schema.name(p.owner),
                    p.name,
                    self.ref_string(r)
                )));
            }
        }
        Ok(())
    }

    // ---- definitions ----------------------------------------------------

    fn check_member_free(&self, owner: ConceptId, name: &str) -> Result<()> {
        let c = self.schema.concept(owner)?;
        if c.dim(name).is_some() || self.property(owner, name).is_some() {
            return Err(Error::DuplicateName(format!("{}.{name}", c.name)));
        }
        if !c.is_user() {
            return Err(Error::InvalidConcept(format!(
                "properties cannot be attached to `{}`",
                c.name
            )));
        }
        Ok(())
    }

    pub fn define_view(&mut self, name: &str, query: Query) -> Result<()> {
        self.check_name_free(name)?;
        let params = Params::new();
        Evaluator::new(self, &params).eval_query(&query)?;
        self.views.push(View {
            name: name.to_string(),
            query,
        });
        Ok(())
    }

    /// Parses `text` as a query and registers it under `name`.
    pub fn define_view_text(&mut self, name: &str, text: &str) -> Result<()> {
        let q = parse_query(text)?;
        self.define_view(name, q)
    }

    pub fn define_virtual_property(&mut self, owner: ConceptId, name: &str, body: Expr) -> Result<()> {
        self.check_member_free(owner, name)?;
        let mut nodes: Vec<(ConceptId, String, &Expr)> = self
            .props
            .iter()
            .filter_map(|p| match &p.kind {
                PropertyKind::Virtual(e) => Some((p.owner, p.name.clone(), e)),
                _ => None,
            })
            .collect();
        nodes.push((owner, name.to_string(), &body));
        if let Some(trail) = virtual_cycle(&nodes) {
            return Err(Error::CycleDetected(trail));
        }
        self.props.push(PropertyDef {
            owner,
            name: name.to_string(),
            kind: PropertyKind::Virtual(body.clone()),
        });
        let params = Params::new();
        let mut ev = Evaluator::new(self, &params);
        let mut failure = None;
        for (r, _) in self.store.items(owner) {
            match ev.value_on(r, &body) {
                Ok(_) | Err(Error::UnknownProperty(_)) | Err(Error::UnknownParameter(_)) => {}
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failure {
            self.props.pop();
            return Err(e);
        }
        Ok(())
    }

    pub fn define_constraint(&mut self, owner: ConceptId, name: &str, body: Expr) -> Result<()> {
        self.check_member_free(owner, name)?;
        let def = PropertyDef {
            owner,
            name: name.to_string(),
            kind: PropertyKind::Constraint(body.clone()),
        };
        self.check_constraint(&def, &body)?;
        self.props.push(def);
        Ok(())
    }

    /// Creates the hidden link concept `MV_<owner>_<name>` and registers the property.
    pub fn define_mv_property(&mut self, owner: ConceptId, name: &str, target: ConceptId) -> Result<ConceptId> {
        self.check_member_free(owner, name)?;
        let tc = self.schema.concept(target)?;
        if !tc.is_user() {
            return Err(Error::InvalidConcept(format!(
                "`{}` cannot be the target of a multi-valued property",
                tc.name
            )));
        }
        let link_name = format!("MV_{}_{}", self.schema.name(owner), name);
        let mut def = ConceptDef::new(
            link_name.clone(),
            vec![
                DimDef::new("src", self.schema.name(owner)),
                DimDef::new("tgt", self.schema.name(target)),
            ],
        );
        def.hidden = true;
        let link = match self.schema.lookup(&link_name) {
            // A hidden concept restored from a snapshot is reattached.
            Some(existing) if self.is_link_shape(existing, owner, target) => existing,
            _ => self.define_concepts(vec![def])?[0],
        };
        self.props.push(PropertyDef {
            owner,
            name: name.to_string(),
            kind: PropertyKind::MultiValued { link, target },
        });
        Ok(link)
    }

    fn is_link_shape(&self, c: ConceptId, owner: ConceptId, target: ConceptId) -> bool {
        let in_use = self
            .props
            .iter()
            .any(|p| matches!(p.kind, PropertyKind::MultiValued { link, .. } if link == c));
        match self.schema.concept(c) {
            Ok(concept) => {
                !in_use
                    && concept.hidden
                    && concept.dims.len() == 2
                    && concept.dims[0].name == "src"
                    && concept.dims[0].domain == owner
                    && concept.dims[1].name == "tgt"
                    && concept.dims[1].domain == target
            }
            Err(_) => false,
        }
    }

    fn mv_prop(&self, owner: ConceptId, name: &str) -> Result<(ConceptId, ConceptId)> {
        self.mv_link(owner, name).ok_or_else(|| {
            Error::UnknownProperty(format!("{}.{name}", self.schema.name(owner)))
        })
    }

    fn find_link(&self, link: ConceptId, i: ItemRef, t: ItemRef) -> Option<ItemRef> {
        let (src, tgt) = (Value::Ref(i), Value::Ref(t));
        self.store
            .items(link)
            .find(|(_, it)| it.values[0] == src && it.values[1] == tgt)
            .map(|(r, _)| r)
    }

    pub fn mv_add(&mut self, i: ItemRef, prop: &str, t: ItemRef) -> Result<ItemRef> {
        let (link, target) = self.mv_prop(i.concept, prop)?;
        if t.concept != target {
            return Err(Error::DomainViolation {
                slot: format!("{}.{prop}", self.schema.name(i.concept)),
                expected: self.schema.name(target).to_string(),
            });
        }
        self.store.item(&self.schema, i)?;
        self.store.item(&self.schema, t)?;
        if self.find_link(link, i, t).is_some() {
            return Err(Error::DuplicateLink {
                src: self.ref_string(i),
                tgt: self.ref_string(t),
            });
        }
        self.insert(link, vec![Value::Ref(i), Value::Ref(t)])
    }

    pub fn mv_remove(&mut self, i: ItemRef, prop: &str, t: ItemRef) -> Result<()> {
        let (link, _) = self.mv_prop(i.concept, prop)?;
        let r = self.find_link(link, i, t).ok_or_else(|| Error::UnknownLink {
            src: self.ref_string(i),
            tgt: self.ref_string(t),
        })?;
        self.delete(r).map(|_| ())
    }

    /// Targets linked from `i`, in link insertion order.
    pub fn mv_get(&self, i: ItemRef, prop: &str) -> Result<Vec<ItemRef>> {
        let (link, _) = self.mv_prop(i.concept, prop)?;
        Ok(self.mv_targets(link, i))
    }

    pub(crate) fn mv_targets(&self, link: ConceptId, i: ItemRef) -> Vec<ItemRef> {
        let src = Value::Ref(i);
        self.store
            .items(link)
            .filter(|(_, it)| it.values[0] == src)
            .filter_map(|(_, it)| it.values[1].as_ref())
            .collect()
    }

    // ---- queries --------------------------------------------------------

    pub fn evaluate(&self, q: &Query, params: &Params) -> Result<ResultSet> {
        Evaluator::new(self, params).eval_query(q)
    }

    pub fn query(&self, text: &str) -> Result<ResultSet> {
        self.evaluate(&parse_query(text)?, &Params::new())
    }

    /// Value of an expression evaluated with `r` as the implicit item.
    pub fn eval_on(&self, r: ItemRef, body: &Expr) -> Result<Value> {
        let params = Params::new();
        Evaluator::new(self, &params).value_on(r, body)
    }
}

/// Every identifier and path step mentioned in an expression.
fn collect_names(e: &Expr, out: &mut HashSet<String>) {
    e.for_each_head(&mut |h, steps| {
        if let Head::Name(n) = h {
            out.insert(n.clone());
        }
        out.extend(steps.iter().cloned());
    });
}

/// Virtual properties a body may read: bare names and `this.x` refer to
/// the owner, deeper steps to same-named properties of other concepts.
fn virtual_refs(owner: ConceptId, body: &Expr, nodes: &[(ConceptId, String, &Expr)]) -> Vec<usize> {
    let mut out = Vec::new();
    body.for_each_head(&mut |h, steps| {
        let Head::Name(n) = h else { return };
        let (own, rest) = match (n.as_str(), steps) {
            ("this", [first, rest @ ..]) => (Some(first), rest),
            ("this", []) => (None, steps),
            _ => (Some(n), steps),
        };
        for (k, (o, pname, _)) in nodes.iter().enumerate() {
            let hit = (*o == owner && own == Some(pname)) || (*o != owner && rest.contains(pname));
            if hit && !out.contains(&k) {
                out.push(k);
            }
        }
    });
    out
}

/// A dependency cycle through the last node, if any.
fn virtual_cycle(nodes: &[(ConceptId, String, &Expr)]) -> Option<String> {
    let start = nodes.len() - 1;
    let edges: Vec<Vec<usize>> = nodes
        .iter()
        .map(|(o, _, e)| virtual_refs(*o, e, nodes))
        .collect();
    fn walk(edges: &[Vec<usize>], at: usize, start: usize, trail: &mut Vec<usize>, seen: &mut HashSet<usize>) -> bool {
        for &n in &edges[at] {
            trail.push(n);
            if n == start || (seen.insert(n) && walk(edges, n, start, trail, seen)) {
                return true;
            }
            trail.pop();
        }
        false
    }
    let mut trail = vec![start];
    walk(&edges, start, start, &mut trail, &mut HashSet::new()).then(|| {
        trail
            .iter()
            .map(|&k| nodes[k].1.as_str())
            .collect::<Vec<_>>()
            .join(" -> ")
    })
}
