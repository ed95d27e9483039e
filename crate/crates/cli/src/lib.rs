//! Line-oriented command sessions over a [`codm::Database`].
//!
//! Every line is one statement: DDL (`concept ...`), a definition
//! (`view`, `property`, `constraint`, `mv`), an item line
//! (`Objects <Sizes#1, Colors#2>`), a query (`{...}`) or a command.

use std::fmt::Write as _;
use std::fs;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use codm::analytics::{
    build_cube, change_level, hierarchy_tree, infer, ConstraintSet, CubeSpec, Expansion, Level, LevelChange,
    TreeSpec,
};
use codm::query::ast::AggFn;
use codm::query::{parse_data_line, parse_expr, parse_query};
use codm::schema::parse_ddl;
use codm::snapshot::{self, is_definition, parse_definition};
use codm::{Database, ItemRef, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "jsonl" | "json-lines" | "json" => Ok(Format::Jsonl),
            other => bail!("unknown format `{other}` (expected table, csv or jsonl)"),
        }
    }
}

/// Rows of values under named columns, rendered per [`Format`].
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn render(&self, db: &Database, format: Format) -> Result<String> {
        match format {
            Format::Table => Ok(self.aligned(db)),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(|v| plain(db, v)))?;
                }
                Ok(String::from_utf8(w.into_inner()?)?)
            }
            Format::Jsonl => {
                let mut out = String::new();
                for row in &self.rows {
                    let obj: serde_json::Map<String, serde_json::Value> = self
                        .columns
                        .iter()
                        .cloned()
                        .zip(row.iter().map(|v| json(db, v)))
                        .collect();
                    out.push_str(&serde_json::Value::Object(obj).to_string());
                    out.push('\n');
                }
                Ok(out)
            }
        }
    }

    fn aligned(&self, db: &Database) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|v| db.display_value(v)).collect())
            .collect();
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |fields: &[String]| {
            let padded: Vec<String> = fields
                .iter()
                .zip(&widths)
                .map(|(f, w)| format!("{f:<w$}"))
                .collect();
            padded.join(" | ").trim_end().to_string()
        };
        let mut out = line(&self.columns);
        out.push('\n');
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&rule.join("-+-"));
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row));
            out.push('\n');
        }
        let _ = writeln!(out, "({} row{})", cells.len(), if cells.len() == 1 { "" } else { "s" });
        out
    }
}

fn plain(db: &Database, v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Str(s) => s.to_string(),
        Value::Ref(r) => db.ref_string(*r),
        other => db.display_value(other),
    }
}

fn json(db: &Database, v: &Value) -> serde_json::Value {
    use serde_json::Value as J;
    match v {
        Value::Null => J::Null,
        Value::Bool(b) => J::Bool(*b),
        Value::Int(i) => J::from(*i),
        Value::Real(r) => serde_json::Number::from_f64(*r).map_or(J::Null, J::Number),
        Value::Str(s) => J::String(s.to_string()),
        Value::Ref(r) => J::String(db.ref_string(*r)),
    }
}

/// What a statement asks of the caller beyond its printed output.
#[derive(Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Quit,
}

#[derive(Default)]
pub struct Session {
    pub db: Database,
    pub format: Format,
    /// Print the reference of each inserted item.
    pub echo: bool,
    cube: Option<CubeSpec>,
    tree: Option<(TreeSpec, usize)>,
}

fn split_word(s: &str) -> (&str, &str) {
    let s = s.trim();
    match s.find(char::is_whitespace) {
        Some(k) => (&s[..k], s[k..].trim()),
        None => (s, ""),
    }
}

fn segs(path: &str) -> Vec<String> {
    path.split('.').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// `Sizes#1.fits` into the item and the property name.
fn item_dot(db: &Database, text: &str) -> Result<(ItemRef, String)> {
    let (item, prop) = text
        .trim()
        .split_once('.')
        .ok_or_else(|| anyhow!("expected `Concept#id.name`, found `{}`", text.trim()))?;
    Ok((db.parse_ref(item.trim())?, prop.trim().to_string()))
}

impl Session {
    pub fn new(format: Format) -> Self {
        Session {
            format,
            ..Session::default()
        }
    }

    pub fn with_database(db: Database, format: Format) -> Self {
        Session {
            db,
            format,
            ..Session::default()
        }
    }

    /// Runs one statement. On error the database is left as it was.
    pub fn execute(&mut self, line: &str, out: &mut String) -> Result<Flow> {
        let line = line.trim();
        if line.is_empty() || line.starts_with("--") || line.starts_with('#') {
            return Ok(Flow::Continue);
        }
        let saved = self.db.clone();
        let result = self.dispatch(line, out);
        if result.is_err() {
            self.db = saved;
        }
        result
    }

    fn dispatch(&mut self, line: &str, out: &mut String) -> Result<Flow> {
        if line.starts_with('{') {
            let rs = self.db.query(line)?;
            let table = Table {
                columns: rs.columns.iter().map(|c| c.name.clone()).collect(),
                rows: rs.rows,
            };
            out.push_str(&table.render(&self.db, self.format)?);
            return Ok(Flow::Continue);
        }
        if is_definition(line) {
            self.db.apply_definition(&parse_definition(line)?)?;
            return Ok(Flow::Continue);
        }
        let (word, rest) = split_word(line);
        match word {
            "quit" | "exit" => return Ok(Flow::Quit),
            "concept" => {
                self.db.define_concepts(vec![parse_ddl(line)?])?;
            }
            "schema" => {
                out.push_str(&self.db.schema().dump());
                for d in self.db.definitions() {
                    let _ = writeln!(out, "{d}");
                }
            }
            "format" => self.format = rest.parse()?,
            "load" => {
                let text = fs::read_to_string(rest).with_context(|| format!("reading {rest}"))?;
                self.db = snapshot::load(&text)?;
                self.cube = None;
                self.tree = None;
            }
            "save" => {
                fs::write(rest, snapshot::save(&self.db)).with_context(|| format!("writing {rest}"))?;
            }
            "add" | "remove" => {
                let (target, item) = rest
                    .rsplit_once(char::is_whitespace)
                    .ok_or_else(|| anyhow!("expected `{word} Concept#id.property Target#id`"))?;
                let (i, prop) = item_dot(&self.db, target)?;
                let t = self.db.parse_ref(item.trim())?;
                if word == "add" {
                    self.db.mv_add(i, &prop, t)?;
                } else {
                    self.db.mv_remove(i, &prop, t)?;
                }
            }
            "update" => {
                let (lhs, rhs) = rest
                    .split_once('=')
                    .ok_or_else(|| anyhow!("expected `update Concept#id.dimension = value`"))?;
                let (r, dim) = item_dot(&self.db, lhs)?;
                let value = self.db.const_value(&codm::query::parse_const(rhs)?)?;
                self.db.update(r, &dim, value)?;
            }
            "delete" => {
                let r = self.db.parse_ref(rest)?;
                let report = self.db.delete(r)?;
                let deleted: Vec<String> = report.deleted.iter().map(|r| self.db.ref_string(*r)).collect();
                let _ = writeln!(out, "deleted: {}", deleted.join(", "));
                if !report.nulled.is_empty() {
                    let nulled: Vec<String> = report
                        .nulled
                        .iter()
                        .map(|(r, d)| format!("{}.{d}", self.db.ref_string(*r)))
                        .collect();
                    let _ = writeln!(out, "nulled: {}", nulled.join(", "));
                }
            }
            "gc" => {
                let gone: Vec<String> = self.db.run_gc().iter().map(|r| self.db.ref_string(*r)).collect();
                if gone.is_empty() {
                    out.push_str("collected: none\n");
                } else {
                    let _ = writeln!(out, "collected: {}", gone.join(", "));
                }
            }
            "cube" => {
                let spec = self.parse_cube(rest)?;
                self.show_cube(&spec, out)?;
                self.cube = Some(spec);
            }
            "rollup" | "drilldown" => {
                let spec = self.cube.as_ref().ok_or_else(|| anyhow!("no cube yet; run `cube` first"))?;
                let (axis, via) = split_word(rest);
                let axis: usize = axis.parse().with_context(|| format!("bad axis index `{axis}`"))?;
                let dir = if word == "rollup" {
                    LevelChange::RollUp
                } else {
                    LevelChange::DrillDown
                };
                let next = change_level(&self.db, spec, axis, dir, via)?;
                self.show_cube(&next, out)?;
                self.cube = Some(next);
            }
            "infer" => self.infer(rest, out)?,
            "tree" => {
                let (depth, levels) = self.parse_tree(rest)?;
                let spec = TreeSpec { levels };
                out.push_str(&hierarchy_tree(&self.db, &spec, depth)?.dump(&self.db));
                self.tree = Some((spec, depth));
            }
            "expand" => {
                let (mut spec, depth) = self.tree.clone().ok_or_else(|| anyhow!("no tree yet; run `tree` first"))?;
                spec.levels.push(self.parse_level(rest)?);
                let depth = depth.max(spec.levels.len());
                out.push_str(&hierarchy_tree(&self.db, &spec, depth)?.dump(&self.db));
                self.tree = Some((spec, depth));
            }
            "filter" => {
                let (mut spec, depth) = self.tree.clone().ok_or_else(|| anyhow!("no tree yet; run `tree` first"))?;
                let (k, expr) = split_word(rest);
                let k: usize = k.parse().with_context(|| format!("bad level index `{k}`"))?;
                let level = spec
                    .levels
                    .get_mut(k)
                    .ok_or_else(|| anyhow!("the tree has no level {k}"))?;
                level.filter = if expr.is_empty() { None } else { Some(parse_expr(expr)?) };
                out.push_str(&hierarchy_tree(&self.db, &spec, depth)?.dump(&self.db));
                self.tree = Some((spec, depth));
            }
            "query" => {
                // `query NAME = {...}` style named queries.
                let q = parse_query(rest)?;
                let rs = self.db.evaluate(&q, &Default::default())?;
                let table = Table {
                    columns: rs.columns.iter().map(|c| c.name.clone()).collect(),
                    rows: rs.rows,
                };
                out.push_str(&table.render(&self.db, self.format)?);
            }
            _ if line.contains('<') => self.insert(line, out)?,
            _ => bail!("unknown command `{word}`"),
        }
        Ok(Flow::Continue)
    }

    fn insert(&mut self, line: &str, out: &mut String) -> Result<()> {
        let dl = parse_data_line(line)?;
        let c = self.db.mutable_concept(&dl.concept)?;
        let values = dl
            .values
            .iter()
            .map(|k| self.db.const_value(k))
            .collect::<codm::Result<Vec<_>>>()?;
        let r = match dl.id {
            Some(id) => self.db.insert_with_id(c, id, values)?,
            None => self.db.insert(c, values)?,
        };
        if self.echo {
            let _ = writeln!(out, "{}", self.db.ref_string(r));
        }
        Ok(())
    }

    /// `Fact by path[, path...] agg [measure] [where expr]`; an empty path
    /// is written `.` and puts the facts themselves on an axis.
    fn parse_cube(&self, text: &str) -> Result<CubeSpec> {
        let (body, filter) = match text.split_once(" where ") {
            Some((b, f)) => (b, Some(parse_expr(f)?)),
            None => (text, None),
        };
        let (fact, rest) = split_word(body);
        let rest = rest
            .strip_prefix("by")
            .ok_or_else(|| anyhow!("expected `cube Fact by axis[, axis] agg [measure]`"))?;
        let mut words = rest.trim();
        let mut axes = Vec::new();
        loop {
            let (axis, tail) = split_word(words);
            let (axis, more) = match axis.strip_suffix(',') {
                Some(a) => (a, true),
                None => (axis, tail.starts_with(',')),
            };
            axes.push(if axis == "." { String::new() } else { axis.to_string() });
            words = tail.trim_start_matches(',').trim();
            if !more {
                break;
            }
        }
        let (agg, measure) = split_word(words);
        let agg = AggFn::from_name(agg).ok_or_else(|| anyhow!("unknown aggregate `{agg}`"))?;
        let measure = if measure.is_empty() { None } else { Some(parse_expr(measure)?) };
        let fact = self.db.concept_id(fact)?;
        let axes: Vec<&str> = axes.iter().map(String::as_str).collect();
        let mut spec = CubeSpec::new(&self.db, fact, &axes, measure, agg)?;
        if let Some(f) = filter {
            spec = spec.with_filter(f);
        }
        Ok(spec)
    }

    fn show_cube(&self, spec: &CubeSpec, out: &mut String) -> Result<()> {
        let cube = build_cube(&self.db, spec)?;
        let mut columns: Vec<String> = cube.axes.iter().map(|c| self.db.schema().name(*c).to_string()).collect();
        columns.push(cube.agg.name().to_string());
        let rows = cube
            .cells
            .iter()
            .map(|cell| {
                let mut row: Vec<Value> = cell.coords.iter().map(|&r| Value::Ref(r)).collect();
                row.push(cell.value.clone().unwrap_or(Value::Null));
                row
            })
            .collect();
        out.push_str(&Table { columns, rows }.render(&self.db, self.format)?);
        Ok(())
    }

    /// `C={refs}[, C2={refs}] -> Target`
    fn infer(&self, text: &str, out: &mut String) -> Result<()> {
        let (inputs, target) = text
            .rsplit_once("->")
            .ok_or_else(|| anyhow!("expected `infer Concept={{items}} -> Target`"))?;
        let target = self.db.concept_id(target.trim())?;
        let mut constraints = ConstraintSet::new();
        let mut rest = inputs.trim();
        while !rest.is_empty() {
            let (name, tail) = rest
                .split_once('=')
                .ok_or_else(|| anyhow!("expected `Concept={{items}}`"))?;
            let tail = tail.trim_start();
            let body = tail
                .strip_prefix('{')
                .and_then(|t| t.split_once('}'))
                .ok_or_else(|| anyhow!("expected `{{items}}` after `{}=`", name.trim()))?;
            let c = self.db.concept_id(name.trim())?;
            let set = constraints.entry(c).or_default();
            for item in body.0.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                set.insert(self.db.parse_ref(item)?);
            }
            rest = body.1.trim().trim_start_matches(',').trim();
        }
        let found = infer(&self.db, &constraints, target)?;
        let table = Table {
            columns: vec![self.db.schema().name(target).to_string()],
            rows: found.into_iter().map(|r| vec![Value::Ref(r)]).collect(),
        };
        out.push_str(&table.render(&self.db, self.format)?);
        Ok(())
    }

    /// `[depth] Level / Level / ...`, where a level is
    /// `Concept [by path | via path] [show p, q]`.
    fn parse_tree(&self, text: &str) -> Result<(usize, Vec<Level>)> {
        let (first, rest) = split_word(text);
        let (depth, body) = match first.parse::<usize>() {
            Ok(d) => (Some(d), rest),
            Err(_) => (None, text),
        };
        let levels = body
            .split('/')
            .map(|l| self.parse_level(l))
            .collect::<Result<Vec<_>>>()?;
        Ok((depth.unwrap_or(levels.len()), levels))
    }

    fn parse_level(&self, text: &str) -> Result<Level> {
        let (text, show) = match text.split_once(" show ") {
            Some((t, s)) => (t, Some(s)),
            None => (text, None),
        };
        let (name, rest) = split_word(text);
        let concept = self.db.concept_id(name)?;
        let (how, path) = split_word(rest);
        let expansion = match how {
            "" => Expansion::All,
            "by" => Expansion::Subitems(segs(path)),
            "via" => Expansion::Property(segs(path)),
            other => bail!("expected `by` or `via` after `{name}`, found `{other}`"),
        };
        let mut level = Level::new(concept, expansion);
        for p in show.unwrap_or("").split(',').map(str::trim).filter(|s| !s.is_empty()) {
            level = level.show(p);
        }
        Ok(level)
    }
}

/// Runs a script, stopping at the first failing line.
pub fn run_script(session: &mut Session, text: &str, out: &mut String) -> Result<()> {
    for (k, line) in text.lines().enumerate() {
        match session.execute(line, out) {
            Ok(Flow::Continue) => {}
            Ok(Flow::Quit) => break,
            Err(e) => return Err(e.context(format!("line {}", k + 1))),
        }
    }
    Ok(())
}
