use std::collections::HashMap;
use std::fmt::Write as _;

use crate::database::Database;
use crate::error::{Error, Result};
use crate::query::ast::{AggFn, Expr};
use crate::query::eval::{aggregate, Evaluator, Params};
use crate::schema::{ConceptId, DimPath};
use crate::value::{ItemRef, Value};

/// A cube axis: a concept reached from the fact concept by `path`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub concept: ConceptId,
    pub path: DimPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeSpec {
    pub fact: ConceptId,
    pub axes: Vec<Axis>,
    /// Evaluated on each fact item; may be omitted for `size`.
    pub measure: Option<Expr>,
    pub agg: AggFn,
    /// Conditions on fact items; null counts as false.
    pub filters: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub coords: Vec<ItemRef>,
    /// `None` when no fact item falls into the cell.
    pub value: Option<Value>,
    pub facts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub axes: Vec<ConceptId>,
    pub agg: AggFn,
    /// The full cross product of the axis extents, first axis outermost.
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelChange {
    RollUp,
    DrillDown,
}

fn segs(dotted: &str) -> Vec<String> {
    if dotted.is_empty() {
        Vec::new()
    } else {
        dotted.split('.').map(str::to_string).collect()
    }
}

impl CubeSpec {
    /// Axes given as dotted paths from the fact concept; the empty path
    /// makes the fact concept itself an axis.
    pub fn new(
        db: &Database,
        fact: ConceptId,
        axis_paths: &[&str],
        measure: Option<Expr>,
        agg: AggFn,
    ) -> Result<Self> {
        let mut axes = Vec::new();
        for p in axis_paths {
            let path = db
                .schema()
                .resolve_path(fact, &segs(p))
                .map_err(|e| Error::InvalidAxisPath(e.to_string()))?;
            axes.push(Axis {
                concept: path.target,
                path,
            });
        }
        let spec = CubeSpec {
            fact,
            axes,
            measure,
            agg,
            filters: Vec::new(),
        };
        spec.validate(db)?;
        Ok(spec)
    }

    pub fn with_filter(mut self, filter: Expr) -> Self {
        self.filters.push(filter);
        self
    }

    pub fn validate(&self, db: &Database) -> Result<()> {
        let schema = db.schema();
        if !schema.concept(self.fact)?.is_user() {
            return Err(Error::InvalidAxisPath(format!(
                "fact concept `{}` has no items",
                schema.name(self.fact)
            )));
        }
        if self.measure.is_none() && self.agg != AggFn::Size {
            return Err(Error::Type(format!("{} needs a measure", self.agg.name())));
        }
        for axis in &self.axes {
            let ok = axis.path.source == self.fact
                && schema
                    .check_path(self.fact, &axis.path.steps)
                    .is_ok_and(|p| p.target == axis.concept && p.target == axis.path.target)
                && schema.concept(axis.concept).is_ok_and(|c| c.is_user());
            if !ok {
                return Err(Error::InvalidAxisPath(format!(
                    "`{}` is not reached from `{}` by `{}`",
                    schema.name(axis.concept),
                    schema.name(self.fact),
                    axis.path.steps.join(".")
                )));
            }
        }
        Ok(())
    }

    /// The same cube written as a query: one binder per axis and a nested
    /// aggregate over the matching fact items.
    pub fn query_text(&self, db: &Database) -> String {
        let schema = db.schema();
        let fact = schema.name(self.fact);
        let binders: Vec<String> = (1..=self.axes.len()).map(|k| format!("a{k}__")).collect();
        let mut out = String::from("{");
        for (k, axis) in self.axes.iter().enumerate() {
            if k > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{}:{}", binders[k], schema.name(axis.concept));
        }
        out.push_str("} <");
        for b in &binders {
            let _ = write!(out, "{b}, ");
        }
        let mut conds: Vec<String> = self
            .axes
            .iter()
            .zip(&binders)
            .map(|(axis, b)| {
                let mut lhs = fact.to_string();
                for s in &axis.path.steps {
                    lhs.push('.');
                    lhs.push_str(s);
                }
                format!("{lhs} == {b}")
            })
            .collect();
        conds.extend(self.filters.iter().map(|f| format!("({f})")));
        let mut inner = format!("{{{fact}");
        if !conds.is_empty() {
            let _ = write!(inner, " | {}", conds.join(" and "));
        }
        inner.push('}');
        if let Some(m) = &self.measure {
            let _ = write!(inner, " <{m}>");
        }
        let _ = write!(out, "{}({inner})>", self.agg.name());
        out
    }
}

/// Aggregates the measure per cell of the cross product of the axis extents.
/// Fact items with a null coordinate fall into no cell.
pub fn build_cube(db: &Database, spec: &CubeSpec) -> Result<Cube> {
    spec.validate(db)?;
    let schema = db.schema();
    let store = db.store();
    let params = Params::new();
    let mut ev = Evaluator::new(db, &params);
    let mut groups: HashMap<Vec<ItemRef>, Vec<Value>> = HashMap::new();
    'facts: for f in store.extent(schema, spec.fact)? {
        for filter in &spec.filters {
            if !ev.test_on(f, filter)? {
                continue 'facts;
            }
        }
        let mut coords = Vec::with_capacity(spec.axes.len());
        for axis in &spec.axes {
            match store.get_super(schema, f, &axis.path)? {
                Value::Ref(r) => coords.push(r),
                _ => continue 'facts,
            }
        }
        let v = match &spec.measure {
            Some(m) => ev.value_on(f, m)?,
            None => Value::Ref(f),
        };
        groups.entry(coords).or_default().push(v);
    }

    let extents: Vec<Vec<ItemRef>> = spec
        .axes
        .iter()
        .map(|a| store.extent(schema, a.concept))
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    if extents.iter().all(|e| !e.is_empty()) {
        let mut idx = vec![0usize; extents.len()];
        loop {
            let coords: Vec<ItemRef> = idx.iter().zip(&extents).map(|(&i, e)| e[i]).collect();
            let (value, facts) = match groups.get(&coords) {
                Some(vals) => (Some(aggregate(spec.agg, vals)?), vals.len()),
                None if spec.agg == AggFn::Size => (Some(Value::Int(0)), 0),
                None => (None, 0),
            };
            cells.push(Cell {
                coords,
                value,
                facts,
            });
            // Odometer, last axis fastest.
            let mut k = idx.len();
            loop {
                if k == 0 {
                    return Ok(Cube {
                        axes: spec.axes.iter().map(|a| a.concept).collect(),
                        agg: spec.agg,
                        cells,
                    });
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < extents[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
    Ok(Cube {
        axes: spec.axes.iter().map(|a| a.concept).collect(),
        agg: spec.agg,
        cells,
    })
}

impl Cube {
    pub fn cell(&self, coords: &[ItemRef]) -> Option<&Cell> {
        self.cells.iter().find(|c| c.coords == coords)
    }

    /// CSV: axis concept names and the aggregate as header, then one row per
    /// non-empty cell (all cells with `include_empty`) in coordinate order.
    pub fn to_csv(&self, db: &Database, include_empty: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self
            .axes
            .iter()
            .map(|&c| db.schema().name(c).to_string())
            .collect();
        header.push(self.agg.name().to_string());
        w.write_record(&header).map_err(csv_err)?;
        let mut cells: Vec<&Cell> = self
            .cells
            .iter()
            .filter(|c| include_empty || c.facts > 0)
            .collect();
        cells.sort_by(|a, b| a.coords.cmp(&b.coords));
        for cell in cells {
            let mut rec: Vec<String> = cell.coords.iter().map(|&r| db.item_label(r)).collect();
            rec.push(match (&cell.value, cell.facts) {
                (_, 0) => String::new(),
                (Some(v), _) => db.display_value(v),
                (None, _) => String::new(),
            });
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Type(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Type(e.to_string())
}

/// Replaces axis `axis` by a coarser (roll-up) or finer (drill-down) level
/// along the dimension `via`. Fact, measure and filters are kept.
pub fn change_level(
    db: &Database,
    spec: &CubeSpec,
    axis: usize,
    direction: LevelChange,
    via: &str,
) -> Result<CubeSpec> {
    let schema = db.schema();
    let current = spec
        .axes
        .get(axis)
        .ok_or_else(|| Error::NoSuchLevel(format!("the cube has no axis {axis}")))?;
    let via_segs = segs(via);
    let new_axis = match direction {
        LevelChange::RollUp => {
            let up = schema
                .resolve_path(current.concept, &via_segs)
                .ok()
                .filter(|p| p.rank() > 0 && schema.concept(p.target).is_ok_and(|c| c.is_user()))
                .ok_or_else(|| {
                    Error::NoSuchLevel(format!(
                        "`{}` has no dimension `{via}` leading to a coarser level",
                        schema.name(current.concept)
                    ))
                })?;
            let mut steps = current.path.steps.clone();
            steps.extend(up.steps);
            Axis {
                concept: up.target,
                path: DimPath {
                    source: spec.fact,
                    steps,
                    target: up.target,
                },
            }
        }
        LevelChange::DrillDown => {
            let steps = &current.path.steps;
            let found = (0..steps.len()).rev().find_map(|k| {
                let below = schema.check_path(spec.fact, &steps[..k]).ok()?;
                let p = schema.resolve_path(below.target, &via_segs).ok()?;
                (p.steps == steps[k..] && p.target == current.concept).then_some(below)
            });
            let below = found.ok_or_else(|| {
                Error::NoSuchLevel(format!(
                    "no level below `{}` via `{via}` on the path from `{}`",
                    schema.name(current.concept),
                    schema.name(spec.fact)
                ))
            })?;
            Axis {
                concept: below.target,
                path: below,
            }
        }
    };
    let mut out = spec.clone();
    out.axes[axis] = new_axis;
    out.validate(db)?;
    Ok(out)
}
