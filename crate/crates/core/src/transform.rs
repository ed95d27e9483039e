//! Merging a superconcept into a subconcept and splitting a concept into a
//! new superconcept. Both keep canonical path names, and hence canonical
//! semantics, unchanged.

use std::collections::{HashMap, HashSet};

use crate::database::Database;
use crate::error::{Error, Result};
use crate::schema::{ConceptDef, ConceptId, DimDef, Dimension};
use crate::value::Value;

fn join_nonempty(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a}.{b}"),
    }
}

fn fresh(base: &str, taken: &HashSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (2..)
        .map(|k| format!("{base}_{k}"))
        .find(|n| !taken.contains(n))
        .expect("unbounded")
}

enum Slot {
    Keep(usize),
    /// Value `j` of the superitem referenced in slot `k`.
    Expand(usize, usize),
}

impl Database {
    /// Replaces every dimension of `subc` pointing at `superc` by copies of
    /// the superconcept's dimensions, holding the superitem values by value.
    /// `superc` is removed when nothing else refers to it.
    pub fn merge_concept(&mut self, superc: ConceptId, subc: ConceptId) -> Result<()> {
        let sup = self.schema.concept(superc)?.clone();
        let sub = self.schema.concept(subc)?.clone();
        if sup.is_primitive() {
            return Err(Error::PrimitiveDomain(sup.name));
        }
        let positions: Vec<usize> = sub
            .dims
            .iter()
            .enumerate()
            .filter(|(_, d)| d.domain == superc && !d.direct)
            .map(|(k, _)| k)
            .collect();
        if positions.is_empty() || !sub.is_user() || !sup.is_user() {
            return Err(Error::NotDirectSuper {
                sup: sup.name,
                sub: sub.name,
            });
        }

        let mut taken: HashSet<String> = sub
            .dims
            .iter()
            .enumerate()
            .filter(|(k, _)| !positions.contains(k))
            .map(|(_, d)| d.name.clone())
            .collect();
        let mut dims = Vec::new();
        let mut layout = Vec::new();
        for (k, d) in sub.dims.iter().enumerate() {
            if !positions.contains(&k) {
                dims.push(d.clone());
                layout.push(Slot::Keep(k));
                continue;
            }
            for (j, x) in sup.dims.iter().enumerate() {
                let label = join_nonempty(d.label(), x.label());
                let (name, label) = if !label.is_empty() && !taken.contains(&label) {
                    (label, None)
                } else {
                    (fresh(&format!("{}.{}", d.name, x.name), &taken), Some(label))
                };
                taken.insert(name.clone());
                dims.push(Dimension {
                    name,
                    domain: x.domain,
                    nullable: d.nullable || x.nullable,
                    direct: x.direct,
                    label,
                });
                layout.push(Slot::Expand(k, j));
            }
        }

        let sup_items: HashMap<u64, Vec<Value>> = self
            .store
            .items(superc)
            .map(|(r, it)| (r.id, it.values.clone()))
            .collect();
        self.store.rewrite_items(subc, |_, old| {
            layout
                .iter()
                .map(|slot| match *slot {
                    Slot::Keep(k) => old[k].clone(),
                    Slot::Expand(k, j) => match &old[k] {
                        Value::Ref(r) => sup_items
                            .get(&r.id)
                            .map_or(Value::Null, |vals| vals[j].clone()),
                        _ => Value::Null,
                    },
                })
                .collect()
        });
        self.schema.concept_mut(subc)?.dims = dims;

        let still_used = self
            .schema
            .user_concepts()
            .any(|c| c.dims.iter().any(|d| d.domain == superc));
        if !still_used {
            self.store.drop_items_of(superc);
            self.props.retain(|p| p.owner != superc);
            self.schema.remove_concept(superc)?;
        }
        Ok(())
    }

    /// Moves the dimensions `dims` of `c` into a new superconcept `new_name`;
    /// `c` keeps one dimension referencing it. Each distinct projection of
    /// the existing items becomes one new superitem.
    pub fn split_concept(&mut self, c: ConceptId, dims: &[&str], new_name: &str) -> Result<ConceptId> {
        let concept = self.schema.concept(c)?.clone();
        if !concept.is_user() {
            return Err(Error::BadDimensionSubset(format!(
                "`{}` has no dimensions to split",
                concept.name
            )));
        }
        let mut picked: Vec<usize> = Vec::new();
        for name in dims {
            let (k, _) = concept.dim(name).ok_or_else(|| {
                Error::BadDimensionSubset(format!("`{}` has no dimension `{name}`", concept.name))
            })?;
            if picked.contains(&k) {
                return Err(Error::BadDimensionSubset(format!("`{name}` is listed twice")));
            }
            picked.push(k);
        }
        if picked.is_empty() || picked.len() >= concept.dims.len() {
            return Err(Error::BadDimensionSubset(
                "a nonempty proper subset of the dimensions is required".into(),
            ));
        }
        if self.schema.lookup(new_name).is_some() || self.view(new_name).is_some() {
            return Err(Error::DuplicateName(new_name.to_string()));
        }
        picked.sort_unstable();
        let moved: Vec<&Dimension> = picked.iter().map(|&k| &concept.dims[k]).collect();
        let remaining: HashSet<String> = concept
            .dims
            .iter()
            .enumerate()
            .filter(|(k, _)| !picked.contains(k))
            .map(|(_, d)| d.name.clone())
            .collect();

        // Labels sharing a leading segment become that segment plus the
        // remainders; otherwise the link is transparent.
        let prefix = common_prefix(moved.iter().map(|d| d.label()));
        let (link_name, link_label, new_dims) = match prefix {
            Some(p) if !remaining.contains(&p) => {
                let defs: Vec<DimDef> = moved
                    .iter()
                    .map(|d| {
                        let mut def = DimDef::new(&d.label()[p.len() + 1..], self.schema.name(d.domain));
                        def.nullable = d.nullable;
                        def.direct = d.direct;
                        def
                    })
                    .collect();
                (p, None, defs)
            }
            _ => {
                let defs: Vec<DimDef> = moved
                    .iter()
                    .map(|d| {
                        let mut def = DimDef::new(&d.name, self.schema.name(d.domain));
                        def.nullable = d.nullable;
                        def.direct = d.direct;
                        def.label = d.label.clone();
                        def
                    })
                    .collect();
                (fresh(&new_name.to_lowercase(), &remaining), Some(String::new()), defs)
            }
        };
        let new_id = self.define_concepts(vec![ConceptDef::new(new_name, new_dims)])?[0];

        // One superitem per distinct projection, in first-occurrence order.
        let mut projections: HashMap<Vec<Value>, Value> = HashMap::new();
        let mut assignment: HashMap<u64, Value> = HashMap::new();
        let items: Vec<(u64, Vec<Value>)> = self
            .store
            .items(c)
            .map(|(r, it)| (r.id, it.values.clone()))
            .collect();
        for (id, vals) in &items {
            let proj: Vec<Value> = picked.iter().map(|&k| vals[k].clone()).collect();
            let r = match projections.get(&proj) {
                Some(r) => r.clone(),
                None => {
                    let r = Value::Ref(self.store.insert(&self.schema, new_id, proj.clone())?);
                    projections.insert(proj, r.clone());
                    r
                }
            };
            assignment.insert(*id, r);
        }
        let first = picked[0];
        self.store.rewrite_items(c, |r, old| {
            let mut out = Vec::with_capacity(old.len() - picked.len() + 1);
            for (k, v) in old.iter().enumerate() {
                if k == first {
                    out.push(assignment[&r.id].clone());
                } else if !picked.contains(&k) {
                    out.push(v.clone());
                }
            }
            out
        });
        let mut link = Dimension::new(link_name, new_id);
        link.label = link_label;
        let target = self.schema.concept_mut(c)?;
        let mut dims_out = Vec::with_capacity(target.dims.len());
        for (k, d) in target.dims.drain(..).enumerate() {
            if k == first {
                dims_out.push(link.clone());
            } else if !picked.contains(&k) {
                dims_out.push(d);
            }
        }
        target.dims = dims_out;
        Ok(new_id)
    }
}

/// The leading dotted segments shared by all labels, leaving each a nonempty remainder.
fn common_prefix<'a>(labels: impl Iterator<Item = &'a str>) -> Option<String> {
    let split: Vec<Vec<&str>> = labels.map(|l| l.split('.').collect()).collect();
    let first = split.first()?;
    let mut n = 0;
    while split.iter().all(|s| s.len() > n + 1 && s[n] == first[n] && !s[n].is_empty()) {
        n += 1;
    }
    (n > 0).then(|| first[..n].join("."))
}
