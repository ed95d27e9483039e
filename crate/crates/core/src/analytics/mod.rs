//! Grouping, OLAP cubes, inference by constraint propagation and
//! hierarchy trees. Everything here is read-only over a database.

mod cube;
mod infer;
mod tree;

pub use cube::{build_cube, change_level, Axis, Cell, Cube, CubeSpec, LevelChange};
pub use infer::{infer, ConstraintSet};
pub use tree::{hierarchy_tree, Expansion, Level, Node, TreeSpec};

use crate::database::Database;
use crate::error::{Error, Result};
use crate::query::ast::{AggFn, Expr};
use crate::query::eval::{aggregate, Column, Evaluator, Params, ResultSet};
use crate::schema::ConceptId;
use crate::value::{ItemRef, Value};

/// How the members of a group item are found.
#[derive(Debug, Clone, PartialEq)]
pub enum Member {
    /// Items of `concept` whose `path` leads to the group item.
    Subitems { concept: ConceptId, path: Vec<String> },
    /// A multi-valued property of the group concept.
    Property(String),
}

impl Database {
    fn members(&self, g: ItemRef, member: &Member, path: Option<&crate::schema::DimPath>) -> Result<Vec<ItemRef>> {
        match member {
            Member::Subitems { concept, .. } => {
                let path = path.expect("resolved for subitems");
                let mut out = Vec::new();
                for (r, _) in self.store.items(*concept) {
                    if self.store.get_super(&self.schema, r, path)? == Value::Ref(g) {
                        out.push(r);
                    }
                }
                Ok(out)
            }
            Member::Property(p) => self.mv_get(g, p),
        }
    }

    /// One row per item of `groups`: the item and `agg` over the measure of
    /// its members. Without a measure only `size` is meaningful.
    pub fn group_aggregate(
        &self,
        groups: ConceptId,
        member: &Member,
        measure: Option<&Expr>,
        agg: AggFn,
    ) -> Result<ResultSet> {
        let path = match member {
            Member::Subitems { concept, path } => {
                let p = self.schema.resolve_path(*concept, path)?;
                if p.target != groups {
                    return Err(Error::Type(format!(
                        "`{}.{}` leads to `{}`, not `{}`",
                        self.schema.name(*concept),
                        path.join("."),
                        self.schema.name(p.target),
                        self.schema.name(groups)
                    )));
                }
                Some(p)
            }
            Member::Property(name) => {
                if self.mv_link(groups, name).is_none() {
                    return Err(Error::UnknownProperty(format!(
                        "{}.{name}",
                        self.schema.name(groups)
                    )));
                }
                None
            }
        };
        if measure.is_none() && agg != AggFn::Size {
            return Err(Error::Type(format!("{} needs a measure", agg.name())));
        }
        let params = Params::new();
        let mut ev = Evaluator::new(self, &params);
        let mut rows = Vec::new();
        for g in self.store.extent(&self.schema, groups)? {
            let members = self.members(g, member, path.as_ref())?;
            let values = match measure {
                Some(m) => members
                    .iter()
                    .map(|&r| ev.value_on(r, m))
                    .collect::<Result<Vec<_>>>()?,
                None => members.into_iter().map(Value::Ref).collect(),
            };
            rows.push(vec![Value::Ref(g), aggregate(agg, &values)?]);
        }
        Ok(ResultSet {
            name: None,
            columns: vec![
                Column {
                    name: self.schema.name(groups).to_string(),
                    domain: Some(groups),
                },
                Column {
                    name: agg.name().to_string(),
                    domain: None,
                },
            ],
            rows,
        })
    }
}
