use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::database::Database;
use crate::error::{Error, Result};
use crate::schema::{ConceptId, DimPath};
use crate::value::{ItemRef, Value};

/// Allowed items per constrained concept; absent concepts are unconstrained.
pub type ConstraintSet = BTreeMap<ConceptId, BTreeSet<ItemRef>>;

/// User concepts below every concept in `involved` that have no proper
/// superconcept with the same property.
fn maximal_common_subconcepts(db: &Database, involved: &[ConceptId]) -> Vec<ConceptId> {
    let schema = db.schema();
    let common: Vec<ConceptId> = schema
        .user_concepts()
        .map(|c| c.id)
        .filter(|&f| involved.iter().all(|&x| schema.is_subconcept_of(f, x)))
        .collect();
    common
        .iter()
        .copied()
        .filter(|&f| !common.iter().any(|&g| g != f && schema.is_subconcept_of(f, g)))
        .collect()
}

/// Propagates the input constraints down to the maximal common subconcepts,
/// keeps the fact items whose every path to each constrained concept lands
/// in its allowed set, and returns the target items those facts reach, in
/// extent order.
pub fn infer(db: &Database, inputs: &ConstraintSet, target: ConceptId) -> Result<Vec<ItemRef>> {
    let schema = db.schema();
    let store = db.store();
    for &c in inputs.keys().chain([&target]) {
        if !schema.concept(c)?.is_user() {
            return Err(Error::InvalidConcept(format!(
                "`{}` has no stored items",
                schema.name(c)
            )));
        }
    }
    let mut involved: Vec<ConceptId> = inputs.keys().copied().collect();
    if !involved.contains(&target) {
        involved.push(target);
    }
    let facts = maximal_common_subconcepts(db, &involved);
    if facts.is_empty() {
        return Err(Error::NoCommonSubconcept(schema.name(target).to_string()));
    }

    let mut reached: HashSet<ItemRef> = HashSet::new();
    for f in facts {
        let constrained: Vec<(Vec<DimPath>, &BTreeSet<ItemRef>)> = inputs
            .iter()
            .map(|(&c, allowed)| Ok((schema.enumerate_paths(f, c)?, allowed)))
            .collect::<Result<_>>()?;
        let upward = schema.enumerate_paths(f, target)?;
        'facts: for (r, _) in store.items(f) {
            for (paths, allowed) in &constrained {
                for p in paths {
                    match store.get_super(schema, r, p)? {
                        Value::Ref(x) if allowed.contains(&x) => {}
                        _ => continue 'facts,
                    }
                }
            }
            for p in &upward {
                if let Value::Ref(x) = store.get_super(schema, r, p)? {
                    reached.insert(x);
                }
            }
        }
    }
    if let Some(allowed) = inputs.get(&target) {
        reached.retain(|x| allowed.contains(x));
    }
    Ok(store
        .extent(schema, target)?
        .into_iter()
        .filter(|x| reached.contains(x))
        .collect())
}
