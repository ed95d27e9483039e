//! Extents: items as combinations of superitem references, with usage counts,
//! null-propagating deletion and garbage collection of local concepts.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::schema::{ConceptId, ConceptKind, DimPath, GcScope, PrimitiveType, Schema};
use crate::value::{ItemRef, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub values: Vec<Value>,
    uses: usize,
}

impl Item {
    /// Number of live slots anywhere in the database holding this item's reference.
    pub fn uses(&self) -> usize {
        self.uses
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extent {
    items: BTreeMap<u64, Item>,
    next_id: u64,
}

impl Default for Extent {
    fn default() -> Self {
        Extent {
            items: BTreeMap::new(),
            next_id: 1,
        }
    }
}

impl Extent {
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// What a deletion removed (children before parents) and which slots it nulled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeletionReport {
    pub deleted: Vec<ItemRef>,
    pub nulled: Vec<(ItemRef, String)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Store {
    extents: HashMap<ConceptId, Extent>,
}

pub fn ref_string(schema: &Schema, r: ItemRef) -> String {
    format!("{}#{}", schema.name(r.concept), r.id)
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_live(&self, r: ItemRef) -> bool {
        self.extents
            .get(&r.concept)
            .is_some_and(|e| e.items.contains_key(&r.id))
    }

    pub fn item(&self, schema: &Schema, r: ItemRef) -> Result<&Item> {
        self.extents
            .get(&r.concept)
            .and_then(|e| e.items.get(&r.id))
            .ok_or_else(|| Error::UnknownItem(ref_string(schema, r)))
    }

    pub fn extent_of(&self, c: ConceptId) -> Option<&Extent> {
        self.extents.get(&c)
    }

    /// Live items of a stored concept in insertion order.
    pub fn items(&self, c: ConceptId) -> impl Iterator<Item = (ItemRef, &Item)> + '_ {
        self.extents
            .get(&c)
            .into_iter()
            .flat_map(move |e| e.items.iter().map(move |(id, it)| (ItemRef::new(c, *id), it)))
    }

    pub fn len(&self, c: ConceptId) -> usize {
        self.extents.get(&c).map_or(0, |e| e.items.len())
    }

    /// Insertion-ordered extent; for the bottom concept the inherited union of its parents.
    pub fn extent(&self, schema: &Schema, c: ConceptId) -> Result<Vec<ItemRef>> {
        let concept = schema.concept(c)?;
        match concept.kind {
            ConceptKind::Top => Err(Error::InvalidPath("the top concept has no extent".into())),
            ConceptKind::Bottom => Ok(schema
                .bottom_parents()
                .into_iter()
                .flat_map(|p| self.items(p).map(|(r, _)| r).collect::<Vec<_>>())
                .collect()),
            _ => Ok(self.items(c).map(|(r, _)| r).collect()),
        }
    }

    fn check_slot(
        &self,
        schema: &Schema,
        concept: ConceptId,
        index: usize,
        value: Value,
        live: &dyn Fn(ItemRef) -> bool,
    ) -> Result<Value> {
        let c = schema.concept(concept)?;
        let dim = &c.dims[index];
        let violation = || Error::DomainViolation {
            slot: dim.name.clone(),
            expected: schema.name(dim.domain).to_string(),
        };
        if value.is_null() {
            return if dim.nullable {
                Ok(Value::Null)
            } else {
                Err(Error::NullForbidden(dim.name.clone()))
            };
        }
        match schema.primitive_type(dim.domain) {
            Some(PrimitiveType::String) => match value {
                Value::Str(_) => Ok(value),
                _ => Err(violation()),
            },
            Some(PrimitiveType::Integer) => match value {
                Value::Int(_) => Ok(value),
                _ => Err(violation()),
            },
            Some(PrimitiveType::Real) => match value {
                Value::Real(_) => Ok(value),
                Value::Int(i) => Ok(Value::Real(i as f64)),
                _ => Err(violation()),
            },
            Some(PrimitiveType::Boolean) => match value {
                Value::Bool(_) => Ok(value),
                _ => Err(violation()),
            },
            None => match value {
                Value::Ref(r) if r.concept == dim.domain => {
                    if live(r) {
                        Ok(value)
                    } else {
                        Err(Error::UnknownItem(ref_string(schema, r)))
                    }
                }
                _ => Err(violation()),
            },
        }
    }

    fn check_row(&self, schema: &Schema, c: ConceptId, values: Vec<Value>) -> Result<Vec<Value>> {
        self.check_row_with(schema, c, values, &|r| self.is_live(r))
    }

    fn check_row_with(
        &self,
        schema: &Schema,
        c: ConceptId,
        values: Vec<Value>,
        live: &dyn Fn(ItemRef) -> bool,
    ) -> Result<Vec<Value>> {
        let concept = schema.concept(c)?;
        if !concept.is_user() {
            return Err(Error::InvalidConcept(format!(
                "`{}` cannot hold stored items",
                concept.name
            )));
        }
        if values.len() != concept.dims.len() {
            return Err(Error::ArityMismatch {
                concept: concept.name.clone(),
                expected: concept.dims.len(),
                got: values.len(),
            });
        }
        values
            .into_iter()
            .enumerate()
            .map(|(k, v)| self.check_slot(schema, c, k, v, live))
            .collect()
    }

    fn add_use(&mut self, v: &Value, delta: isize) {
        if let Value::Ref(r) = v {
            if let Some(it) = self
                .extents
                .get_mut(&r.concept)
                .and_then(|e| e.items.get_mut(&r.id))
            {
                it.uses = it.uses.checked_add_signed(delta).expect("usage count underflow");
            }
        }
    }

    pub fn insert(&mut self, schema: &Schema, c: ConceptId, values: Vec<Value>) -> Result<ItemRef> {
        let values = self.check_row(schema, c, values)?;
        let ext = self.extents.entry(c).or_default();
        let id = ext.next_id;
        ext.next_id += 1;
        Ok(self.place(c, id, values))
    }

    /// Inserts with a caller-chosen id, which must not be below the next fresh id.
    pub fn insert_with_id(
        &mut self,
        schema: &Schema,
        c: ConceptId,
        id: u64,
        values: Vec<Value>,
    ) -> Result<ItemRef> {
        let next = self.extents.get(&c).map_or(1, |e| e.next_id);
        if id < next {
            return Err(Error::InvalidPath(format!(
                "id {} of `{}` is below the next fresh id {next}",
                id,
                schema.name(c)
            )));
        }
        let values = self.check_row(schema, c, values)?;
        self.extents.entry(c).or_default().next_id = id + 1;
        Ok(self.place(c, id, values))
    }

    fn place(&mut self, c: ConceptId, id: u64, values: Vec<Value>) -> ItemRef {
        for v in &values {
            self.add_use(v, 1);
        }
        self.extents
            .entry(c)
            .or_default()
            .items
            .insert(id, Item { values, uses: 0 });
        ItemRef::new(c, id)
    }

    /// Bulk loading: references are checked against `declared` rather than
    /// the current extents, so items may refer forward. Usage counts are
    /// left stale until [`Store::recount_uses`].
    pub(crate) fn insert_declared(
        &mut self,
        schema: &Schema,
        c: ConceptId,
        id: u64,
        values: Vec<Value>,
        declared: &HashSet<ItemRef>,
    ) -> Result<ItemRef> {
        let next = self.extents.get(&c).map_or(1, |e| e.next_id);
        if id < next {
            return Err(Error::InvalidPath(format!(
                "id {} of `{}` is below the next fresh id {next}",
                id,
                schema.name(c)
            )));
        }
        let values = self.check_row_with(schema, c, values, &|r| declared.contains(&r))?;
        let ext = self.extents.entry(c).or_default();
        ext.next_id = id + 1;
        ext.items.insert(id, Item { values, uses: 0 });
        Ok(ItemRef::new(c, id))
    }

    pub(crate) fn recount_uses(&mut self) {
        let mut counts: HashMap<ItemRef, usize> = HashMap::new();
        for ext in self.extents.values() {
            for it in ext.items.values() {
                for v in &it.values {
                    if let Value::Ref(r) = v {
                        *counts.entry(*r).or_default() += 1;
                    }
                }
            }
        }
        for (c, ext) in self.extents.iter_mut() {
            for (id, it) in ext.items.iter_mut() {
                it.uses = counts.get(&ItemRef::new(*c, *id)).copied().unwrap_or(0);
            }
        }
    }

    pub fn set_next_id(&mut self, c: ConceptId, next: u64) {
        let ext = self.extents.entry(c).or_default();
        ext.next_id = ext.next_id.max(next);
    }

    /// Follows `path` from `r`; null short-circuits.
    pub fn get_super(&self, schema: &Schema, r: ItemRef, path: &DimPath) -> Result<Value> {
        if path.source != r.concept {
            return Err(Error::InvalidPath(format!(
                "path starts at `{}`, item belongs to `{}`",
                schema.name(path.source),
                schema.name(r.concept)
            )));
        }
        let mut cur = Value::Ref(r);
        for step in &path.steps {
            let at = match &cur {
                Value::Null => return Ok(Value::Null),
                Value::Ref(x) => *x,
                _ => {
                    return Err(Error::InvalidPath(format!(
                        "step `{step}` continues past a primitive value"
                    )))
                }
            };
            let concept = schema.concept(at.concept)?;
            let (k, _) = concept.dim(step).ok_or_else(|| {
                Error::InvalidPath(format!("`{}` has no dimension `{step}`", concept.name))
            })?;
            let item = self
                .extents
                .get(&at.concept)
                .and_then(|e| e.items.get(&at.id))
                .ok_or_else(|| Error::DanglingReference(ref_string(schema, at)))?;
            cur = item.values[k].clone();
        }
        Ok(cur)
    }

    /// Items of `sub` whose value along `path` is `i`.
    pub fn get_subs(
        &self,
        schema: &Schema,
        i: ItemRef,
        sub: ConceptId,
        path: &DimPath,
    ) -> Result<Vec<ItemRef>> {
        if path.source != sub || path.target != i.concept {
            return Err(Error::InvalidPath(format!(
                "path does not lead from `{}` to `{}`",
                schema.name(sub),
                schema.name(i.concept)
            )));
        }
        let target = Value::Ref(i);
        let mut out = Vec::new();
        for (r, _) in self.items(sub) {
            if self.get_super(schema, r, path)? == target {
                out.push(r);
            }
        }
        Ok(out)
    }

    pub fn update(&mut self, schema: &Schema, r: ItemRef, dim: &str, value: Value) -> Result<()> {
        let concept = schema.concept(r.concept)?;
        let (k, _) = concept.dim(dim).ok_or_else(|| Error::UnknownDimension {
            concept: concept.name.clone(),
            dimension: dim.to_string(),
        })?;
        self.item(schema, r)?;
        let value = self.check_slot(schema, r.concept, k, value, &|x| self.is_live(x))?;
        self.add_use(&value, 1);
        let slot = &mut self
            .extents
            .get_mut(&r.concept)
            .and_then(|e| e.items.get_mut(&r.id))
            .expect("checked above")
            .values[k];
        let old = std::mem::replace(slot, value);
        self.add_use(&old, -1);
        Ok(())
    }

    /// Deletes `r`. Slots holding a deleted reference are nulled when
    /// nullable; otherwise their owner is deleted as well.
    pub fn delete(&mut self, schema: &Schema, r: ItemRef) -> Result<DeletionReport> {
        self.item(schema, r)?;
        let mut dying = HashSet::new();
        let mut report = DeletionReport::default();
        self.delete_rec(schema, r, &mut dying, &mut report);
        report.nulled.retain(|(owner, _)| !dying.contains(owner));
        Ok(report)
    }

    fn delete_rec(
        &mut self,
        schema: &Schema,
        r: ItemRef,
        dying: &mut HashSet<ItemRef>,
        report: &mut DeletionReport,
    ) {
        dying.insert(r);
        let uses = self.item(schema, r).map_or(0, |it| it.uses);
        if uses > 0 {
            let target = Value::Ref(r);
            let mut holders = Vec::new();
            for c in schema.user_concepts() {
                for (k, d) in c.dims.iter().enumerate() {
                    if d.domain != r.concept {
                        continue;
                    }
                    for (owner, it) in self.items(c.id) {
                        if it.values[k] == target {
                            holders.push((owner, k, d.nullable, d.name.clone()));
                        }
                    }
                }
            }
            for (owner, k, nullable, dim) in holders {
                if dying.contains(&owner) || !self.is_live(owner) {
                    continue;
                }
                if nullable {
                    let it = self
                        .extents
                        .get_mut(&owner.concept)
                        .and_then(|e| e.items.get_mut(&owner.id))
                        .expect("live owner");
                    it.values[k] = Value::Null;
                    self.add_use(&target, -1);
                    report.nulled.push((owner, dim));
                } else {
                    self.delete_rec(schema, owner, dying, report);
                }
            }
        }
        if let Some(item) = self
            .extents
            .get_mut(&r.concept)
            .and_then(|e| e.items.remove(&r.id))
        {
            for v in &item.values {
                self.add_use(v, -1);
            }
        }
        report.deleted.push(r);
    }

    /// Collects unused items of local concepts until nothing changes.
    pub fn run_gc(&mut self, schema: &Schema) -> Vec<ItemRef> {
        let local: Vec<ConceptId> = schema
            .user_concepts()
            .filter(|c| c.gc == GcScope::Local)
            .map(|c| c.id)
            .collect();
        let mut collected = Vec::new();
        loop {
            let garbage: Vec<ItemRef> = local
                .iter()
                .flat_map(|c| {
                    self.items(*c)
                        .filter(|(_, it)| it.uses == 0)
                        .map(|(r, _)| r)
                        .collect::<Vec<_>>()
                })
                .collect();
            if garbage.is_empty() {
                break;
            }
            for r in garbage {
                if self.is_live(r) {
                    let report = self.delete(schema, r).expect("live item");
                    collected.extend(report.deleted);
                }
            }
        }
        collected
    }

    /// Full-scan check of referential integrity and usage counts.
    pub fn verify(&self, schema: &Schema) -> Vec<String> {
        let mut problems = Vec::new();
        let mut counts: HashMap<ItemRef, usize> = HashMap::new();
        for (&c, ext) in &self.extents {
            let Ok(concept) = schema.concept(c) else {
                if !ext.items.is_empty() {
                    problems.push(format!("items stored for removed concept {c}"));
                }
                continue;
            };
            for (&id, it) in &ext.items {
                let me = ItemRef::new(c, id);
                if it.values.len() != concept.dims.len() {
                    problems.push(format!("{}: wrong arity", ref_string(schema, me)));
                    continue;
                }
                for (v, d) in it.values.iter().zip(&concept.dims) {
                    match v {
                        Value::Null if !d.nullable => problems.push(format!(
                            "{}.{}: null in non-nullable slot",
                            ref_string(schema, me),
                            d.name
                        )),
                        Value::Ref(r) => {
                            *counts.entry(*r).or_default() += 1;
                            if r.concept != d.domain || !self.is_live(*r) {
                                problems.push(format!(
                                    "{}.{}: dangling reference {}",
                                    ref_string(schema, me),
                                    d.name,
                                    ref_string(schema, *r)
                                ));
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
        for (&c, ext) in &self.extents {
            for (&id, it) in &ext.items {
                let me = ItemRef::new(c, id);
                let expected = counts.get(&me).copied().unwrap_or(0);
                if it.uses != expected {
                    problems.push(format!(
                        "{}: stored usage {} but {} slots refer to it",
                        ref_string(schema, me),
                        it.uses,
                        expected
                    ));
                }
            }
        }
        problems.sort();
        problems
    }

    /// Rewrites every item of `c` through `f` and fixes usage counts.
    pub(crate) fn rewrite_items(
        &mut self,
        c: ConceptId,
        mut f: impl FnMut(ItemRef, &[Value]) -> Vec<Value>,
    ) {
        let ids: Vec<u64> = self.extents.get(&c).map_or(Vec::new(), |e| e.items.keys().copied().collect());
        for id in ids {
            let old = self.extents[&c].items[&id].values.clone();
            let new = f(ItemRef::new(c, id), &old);
            for v in &new {
                self.add_use(v, 1);
            }
            for v in &old {
                self.add_use(v, -1);
            }
            self.extents.get_mut(&c).unwrap().items.get_mut(&id).unwrap().values = new;
        }
    }

    pub(crate) fn drop_items_of(&mut self, c: ConceptId) {
        if let Some(ext) = self.extents.get(&c) {
            let values: Vec<Value> = ext.items.values().flat_map(|it| it.values.clone()).collect();
            for v in &values {
                self.add_use(v, -1);
            }
        }
        self.extents.remove(&c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ConceptDef, DimDef};

    struct Fobj {
        schema: Schema,
        store: Store,
        sizes: ConceptId,
        colors: ConceptId,
        objects: ConceptId,
        s: [ItemRef; 2],
        c: [ItemRef; 2],
        o: [ItemRef; 3],
    }

    fn fobj(size_nullable: bool, sizes_local: bool) -> Fobj {
        let mut schema = Schema::new();
        let mut sizes_def = ConceptDef::new("Sizes", vec![DimDef::new("label", "String")]);
        if sizes_local {
            sizes_def = sizes_def.local();
        }
        let sizes = schema.define_concepts(vec![sizes_def]).unwrap()[0];
        let colors = schema.define_concept("Colors", vec![DimDef::new("name", "String")]).unwrap();
        let mut size_dim = DimDef::new("size", "Sizes");
        size_dim.nullable = size_nullable;
        let objects = schema
            .define_concept("Objects", vec![size_dim, DimDef::new("colour", "Colors").nullable()])
            .unwrap();
        let mut store = Store::new();
        let s1 = store.insert(&schema, sizes, vec!["small".into()]).unwrap();
        let s2 = store.insert(&schema, sizes, vec!["large".into()]).unwrap();
        let c1 = store.insert(&schema, colors, vec!["green".into()]).unwrap();
        let c2 = store.insert(&schema, colors, vec!["red".into()]).unwrap();
        let o1 = store.insert(&schema, objects, vec![s1.into(), c2.into()]).unwrap();
        let o2 = store.insert(&schema, objects, vec![s2.into(), c1.into()]).unwrap();
        let o3 = store.insert(&schema, objects, vec![s2.into(), c2.into()]).unwrap();
        Fobj {
            schema,
            store,
            sizes,
            colors,
            objects,
            s: [s1, s2],
            c: [c1, c2],
            o: [o1, o2, o3],
        }
    }

    #[test]
    fn insert_checks() {
        let mut f = fobj(false, false);
        assert_eq!(f.o[0], ItemRef::new(f.objects, 1));
        assert!(f
            .store
            .insert(&f.schema, f.objects, vec![f.s[0].into(), Value::Null])
            .is_ok());
        assert!(matches!(
            f.store.insert(&f.schema, f.objects, vec![Value::Null, f.c[0].into()]),
            Err(Error::NullForbidden(d)) if d == "size"
        ));
        assert!(matches!(
            f.store.insert(&f.schema, f.objects, vec![f.c[0].into(), f.s[0].into()]),
            Err(Error::DomainViolation { slot, expected }) if slot == "size" && expected == "Sizes"
        ));
        assert!(matches!(
            f.store.insert(&f.schema, f.objects, vec![f.s[0].into()]),
            Err(Error::ArityMismatch { .. })
        ));
        assert!(f.store.verify(&f.schema).is_empty());
    }

    #[test]
    fn navigation() {
        let f = fobj(false, false);
        let path = f
            .schema
            .check_path(f.objects, &["size".into(), "label".into()])
            .unwrap();
        assert_eq!(f.store.get_super(&f.schema, f.o[0], &path).unwrap(), Value::str("small"));
        assert_eq!(
            f.store
                .get_super(&f.schema, f.o[0], &DimPath::identity(f.objects))
                .unwrap(),
            Value::Ref(f.o[0])
        );
        let by_size = f.schema.check_path(f.objects, &["size".into()]).unwrap();
        assert_eq!(
            f.store.get_subs(&f.schema, f.s[1], f.objects, &by_size).unwrap(),
            vec![f.o[1], f.o[2]]
        );
        assert_eq!(
            f.store.get_subs(&f.schema, f.s[0], f.objects, &by_size).unwrap(),
            vec![f.o[0]]
        );
        assert_eq!(
            f.store.extent(&f.schema, f.objects).unwrap(),
            f.o.to_vec()
        );
    }

    #[test]
    fn null_short_circuits() {
        let mut f = fobj(false, false);
        f.store.update(&f.schema, f.o[0], "colour", Value::Null).unwrap();
        let path = f
            .schema
            .check_path(f.objects, &["colour".into(), "name".into()])
            .unwrap();
        assert_eq!(f.store.get_super(&f.schema, f.o[0], &path).unwrap(), Value::Null);
    }

    #[test]
    fn update_keeps_identity_and_counts() {
        let mut f = fobj(false, false);
        f.store.update(&f.schema, f.o[0], "colour", f.c[0].into()).unwrap();
        assert_eq!(
            f.store.item(&f.schema, f.o[0]).unwrap().values,
            vec![Value::Ref(f.s[0]), Value::Ref(f.c[0])]
        );
        assert_eq!(f.store.item(&f.schema, f.c[1]).unwrap().uses(), 1);
        f.store.update(&f.schema, f.o[2], "colour", Value::Null).unwrap();
        assert_eq!(f.store.item(&f.schema, f.c[1]).unwrap().uses(), 0);
        assert!(matches!(
            f.store.update(&f.schema, f.o[0], "size", f.c[0].into()),
            Err(Error::DomainViolation { .. })
        ));
        assert!(f.store.verify(&f.schema).is_empty());
    }

    #[test]
    fn delete_cascades_through_non_nullable() {
        let mut f = fobj(false, false);
        let report = f.store.delete(&f.schema, f.s[1]).unwrap();
        assert_eq!(report.deleted, vec![f.o[1], f.o[2], f.s[1]]);
        assert!(report.nulled.is_empty());
        assert!(f.store.verify(&f.schema).is_empty());
    }

    #[test]
    fn delete_nulls_nullable_slots() {
        let mut f = fobj(true, false);
        let report = f.store.delete(&f.schema, f.s[1]).unwrap();
        assert_eq!(report.deleted, vec![f.s[1]]);
        assert_eq!(
            report.nulled,
            vec![(f.o[1], "size".to_string()), (f.o[2], "size".to_string())]
        );
        assert!(f.store.verify(&f.schema).is_empty());
    }

    #[test]
    fn delete_isolated_item() {
        let mut f = fobj(false, false);
        let fresh = f.store.insert(&f.schema, f.colors, vec!["blue".into()]).unwrap();
        let report = f.store.delete(&f.schema, fresh).unwrap();
        assert_eq!(report.deleted, vec![fresh]);
        assert!(matches!(f.store.delete(&f.schema, fresh), Err(Error::UnknownItem(_))));
        // ids are never reused
        let again = f.store.insert(&f.schema, f.colors, vec!["blue".into()]).unwrap();
        assert_eq!(again.id, fresh.id + 1);
    }

    #[test]
    fn gc_collects_only_local() {
        let mut f = fobj(false, true);
        f.store.delete(&f.schema, f.o[0]).unwrap();
        assert_eq!(f.store.run_gc(&f.schema), vec![f.s[0]]);
        assert!(f.store.run_gc(&f.schema).is_empty());

        let mut g = fobj(false, false);
        g.store.delete(&g.schema, g.o[0]).unwrap();
        assert!(g.store.run_gc(&g.schema).is_empty());
        let _ = g.sizes;
    }

    #[test]
    fn gc_chain_reaches_fixpoint() {
        let mut schema = Schema::new();
        let ids = schema
            .define_concepts(vec![
                ConceptDef::new("A", vec![DimDef::new("v", "Integer")]).local(),
                ConceptDef::new("B", vec![DimDef::new("a", "A")]).local(),
                ConceptDef::new("C", vec![DimDef::new("b", "B")]).local(),
            ])
            .unwrap();
        let mut store = Store::new();
        let a = store.insert(&schema, ids[0], vec![1.into()]).unwrap();
        let b = store.insert(&schema, ids[1], vec![a.into()]).unwrap();
        let c = store.insert(&schema, ids[2], vec![b.into()]).unwrap();
        // The C item is itself unused, so collect only after an explicit delete.
        let report = store.delete(&schema, c).unwrap();
        assert_eq!(report.deleted, vec![c]);
        assert_eq!(store.run_gc(&schema), vec![b, a]);
        assert!(store.verify(&schema).is_empty());
    }
}
