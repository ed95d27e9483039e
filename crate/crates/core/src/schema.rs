//! The concept graph: concepts, their ordered dimensions, the virtual top and
//! bottom concepts, dimension paths and canonical (primitive) syntax.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::lex::{Cursor, Tok};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptId(pub(crate) u32);

impl ConceptId {
    pub const TOP: ConceptId = ConceptId(0);
    pub const BOTTOM: ConceptId = ConceptId(1);
    pub const STRING: ConceptId = ConceptId(2);
    pub const INTEGER: ConceptId = ConceptId(3);
    pub const REAL: ConceptId = ConceptId(4);
    pub const BOOLEAN: ConceptId = ConceptId(5);

    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

pub const TOP_NAME: &str = "⊤";
pub const BOTTOM_NAME: &str = "⊥";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveType {
    String,
    Integer,
    Real,
    Boolean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConceptKind {
    Top,
    Bottom,
    Primitive(PrimitiveType),
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GcScope {
    /// Items are deleted only explicitly.
    #[default]
    Persistent,
    /// Items with no remaining users are collected.
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    pub name: String,
    pub domain: ConceptId,
    pub nullable: bool,
    /// Stored reference exempt from concept ordering (self references and similar).
    pub direct: bool,
    /// Segment used when rendering canonical path names; `None` means the
    /// dimension name, an empty label elides the step.
    pub label: Option<String>,
}

impl Dimension {
    pub fn new(name: impl Into<String>, domain: ConceptId) -> Self {
        Dimension {
            name: name.into(),
            domain,
            nullable: false,
            direct: false,
            label: None,
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }

    pub fn is_transparent(&self) -> bool {
        self.label.as_deref() == Some("")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub id: ConceptId,
    pub name: String,
    pub kind: ConceptKind,
    pub dims: Vec<Dimension>,
    pub gc: GcScope,
    /// Link concept backing a multi-valued property.
    pub hidden: bool,
}

impl Concept {
    pub fn is_primitive(&self) -> bool {
        matches!(self.kind, ConceptKind::Primitive(_))
    }

    pub fn is_user(&self) -> bool {
        self.kind == ConceptKind::User
    }

    pub fn dim(&self, name: &str) -> Option<(usize, &Dimension)> {
        self.dims.iter().enumerate().find(|(_, d)| d.name == name)
    }
}

/// Input form of a dimension: the domain is given by name.
#[derive(Debug, Clone, PartialEq)]
pub struct DimDef {
    pub name: String,
    pub domain: String,
    pub nullable: bool,
    pub direct: bool,
    pub label: Option<String>,
}

impl DimDef {
    pub fn new(name: impl Into<String>, domain: impl Into<String>) -> Self {
        DimDef {
            name: name.into(),
            domain: domain.into(),
            nullable: false,
            direct: false,
            label: None,
        }
    }

    pub fn nullable(mut self) -> Self {
        self.nullable = true;
        self
    }

    pub fn direct(mut self) -> Self {
        self.direct = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptDef {
    pub name: String,
    pub dims: Vec<DimDef>,
    pub gc: GcScope,
    pub hidden: bool,
}

impl ConceptDef {
    pub fn new(name: impl Into<String>, dims: Vec<DimDef>) -> Self {
        ConceptDef {
            name: name.into(),
            dims,
            gc: GcScope::Persistent,
            hidden: false,
        }
    }

    pub fn local(mut self) -> Self {
        self.gc = GcScope::Local;
        self
    }
}

/// A sequence of dimensions leading upward from `source` to `target`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DimPath {
    pub source: ConceptId,
    pub steps: Vec<String>,
    pub target: ConceptId,
}

impl DimPath {
    pub fn identity(c: ConceptId) -> Self {
        DimPath {
            source: c,
            steps: Vec::new(),
            target: c,
        }
    }

    pub fn rank(&self) -> usize {
        self.steps.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    CycleDetected(String),
    UnknownDomain { concept: String, dimension: String },
    EmptyIntent(String),
    DuplicateDimension { concept: String, dimension: String },
    PrimitiveWithDimensions(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CycleDetected(chain) => write!(f, "cycle detected: {chain}"),
            Violation::UnknownDomain { concept, dimension } => {
                write!(f, "{concept}.{dimension}: domain does not exist")
            }
            Violation::EmptyIntent(c) => write!(f, "{c}: concept has no dimensions"),
            Violation::DuplicateDimension { concept, dimension } => {
                write!(f, "{concept}.{dimension}: duplicate dimension name")
            }
            Violation::PrimitiveWithDimensions(c) => write!(f, "{c}: primitive with dimensions"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Super,
    Sub,
}

/// An upward edge used for path enumeration: a non-direct dimension, or for
/// the bottom concept one inherited edge per parent.
#[derive(Debug, Clone)]
struct Edge<'a> {
    name: &'a str,
    label: &'a str,
    domain: ConceptId,
}

#[derive(Debug, Clone)]
pub struct Schema {
    concepts: Vec<Option<Concept>>,
    names: HashMap<String, ConceptId>,
}

impl Default for Schema {
    fn default() -> Self {
        Self::new()
    }
}

impl Schema {
    pub fn new() -> Self {
        let mut s = Schema {
            concepts: Vec::new(),
            names: HashMap::new(),
        };
        let builtin = [
            (TOP_NAME, ConceptKind::Top),
            (BOTTOM_NAME, ConceptKind::Bottom),
            ("String", ConceptKind::Primitive(PrimitiveType::String)),
            ("Integer", ConceptKind::Primitive(PrimitiveType::Integer)),
            ("Real", ConceptKind::Primitive(PrimitiveType::Real)),
            ("Boolean", ConceptKind::Primitive(PrimitiveType::Boolean)),
        ];
        for (name, kind) in builtin {
            let id = ConceptId(s.concepts.len() as u32);
            s.concepts.push(Some(Concept {
                id,
                name: name.to_string(),
                kind,
                dims: Vec::new(),
                gc: GcScope::Persistent,
                hidden: false,
            }));
            s.names.insert(name.to_string(), id);
        }
        s
    }

    pub fn lookup(&self, name: &str) -> Option<ConceptId> {
        self.names.get(name).copied()
    }

    pub fn id(&self, name: &str) -> Result<ConceptId> {
        self.lookup(name)
            .ok_or_else(|| Error::UnknownConcept(name.to_string()))
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        matches!(self.concepts.get(id.0 as usize), Some(Some(_)))
    }

    pub fn concept(&self, id: ConceptId) -> Result<&Concept> {
        self.concepts
            .get(id.0 as usize)
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::UnknownConcept(id.to_string()))
    }

    pub(crate) fn concept_mut(&mut self, id: ConceptId) -> Result<&mut Concept> {
        self.concepts
            .get_mut(id.0 as usize)
            .and_then(Option::as_mut)
            .ok_or_else(|| Error::UnknownConcept(id.to_string()))
    }

    pub fn name(&self, id: ConceptId) -> &str {
        self.concept(id).map(|c| c.name.as_str()).unwrap_or("?")
    }

    /// All concepts (virtual and primitive included) in registration order.
    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.iter().flatten()
    }

    pub fn user_concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts().filter(|c| c.is_user())
    }

    pub fn primitive_type(&self, id: ConceptId) -> Option<PrimitiveType> {
        match self.concept(id).ok()?.kind {
            ConceptKind::Primitive(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_primitive(&self, id: ConceptId) -> bool {
        self.primitive_type(id).is_some()
    }

    pub fn define_concept(&mut self, name: &str, dims: Vec<DimDef>) -> Result<ConceptId> {
        self.define_concepts(vec![ConceptDef::new(name, dims)])
            .map(|ids| ids[0])
    }

    /// Registers a batch of concepts whose dimensions may refer to each other.
    /// The whole batch is rejected if any definition is invalid.
    pub fn define_concepts(&mut self, defs: Vec<ConceptDef>) -> Result<Vec<ConceptId>> {
        let mut batch_names = HashMap::new();
        for (k, def) in defs.iter().enumerate() {
            if def.name.is_empty() {
                return Err(Error::InvalidConcept("concept name is empty".into()));
            }
            if self.names.contains_key(&def.name) || batch_names.contains_key(&def.name) {
                return Err(Error::DuplicateName(def.name.clone()));
            }
            batch_names.insert(def.name.clone(), ConceptId((self.concepts.len() + k) as u32));
        }
        let mut built = Vec::with_capacity(defs.len());
        for def in &defs {
            let id = batch_names[&def.name];
            if def.dims.is_empty() {
                return Err(Error::InvalidConcept(format!(
                    "`{}` needs at least one dimension",
                    def.name
                )));
            }
            let mut seen = HashSet::new();
            let mut dims = Vec::with_capacity(def.dims.len());
            for d in &def.dims {
                if d.name.is_empty() {
                    return Err(Error::InvalidConcept(format!(
                        "`{}` has a dimension with an empty name",
                        def.name
                    )));
                }
                if !seen.insert(d.name.as_str()) {
                    return Err(Error::DuplicateName(format!("{}.{}", def.name, d.name)));
                }
                let domain = batch_names
                    .get(&d.domain)
                    .copied()
                    .or_else(|| self.lookup(&d.domain))
                    .ok_or_else(|| Error::UnknownDomain {
                        dimension: format!("{}.{}", def.name, d.name),
                        domain: d.domain.clone(),
                    })?;
                if domain == ConceptId::TOP || domain == ConceptId::BOTTOM {
                    return Err(Error::UnknownDomain {
                        dimension: format!("{}.{}", def.name, d.name),
                        domain: d.domain.clone(),
                    });
                }
                dims.push(Dimension {
                    name: d.name.clone(),
                    domain,
                    nullable: d.nullable,
                    direct: d.direct,
                    label: d.label.clone(),
                });
            }
            built.push(Concept {
                id,
                name: def.name.clone(),
                kind: ConceptKind::User,
                dims,
                gc: def.gc,
                hidden: def.hidden,
            });
        }

        let start = self.concepts.len();
        for c in built {
            self.names.insert(c.name.clone(), c.id);
            self.concepts.push(Some(c));
        }
        let new_ids: Vec<ConceptId> = (start..self.concepts.len())
            .map(|i| ConceptId(i as u32))
            .collect();
        for &id in &new_ids {
            if let Some(chain) = self.find_cycle_from(id) {
                for &rid in &new_ids {
                    let name = self.concepts[rid.0 as usize].as_ref().unwrap().name.clone();
                    self.names.remove(&name);
                }
                self.concepts.truncate(start);
                return Err(Error::CycleDetected(chain));
            }
        }
        Ok(new_ids)
    }

    fn find_cycle_from(&self, start: ConceptId) -> Option<String> {
        // DFS over non-direct dimensions, looking for a route back to `start`.
        fn walk(
            s: &Schema,
            at: ConceptId,
            start: ConceptId,
            trail: &mut Vec<String>,
            seen: &mut HashSet<ConceptId>,
        ) -> bool {
            let Ok(c) = s.concept(at) else { return false };
            for d in c.dims.iter().filter(|d| !d.direct) {
                trail.push(format!("{}.{} -> {}", c.name, d.name, s.name(d.domain)));
                if d.domain == start {
                    return true;
                }
                if seen.insert(d.domain) && walk(s, d.domain, start, trail, seen) {
                    return true;
                }
                trail.pop();
            }
            false
        }
        let mut trail = Vec::new();
        let mut seen = HashSet::new();
        walk(self, start, start, &mut trail, &mut seen).then(|| trail.join(", "))
    }

    /// Removes a concept that has no items (checked by the caller) and no referencing dimension.
    pub(crate) fn remove_concept(&mut self, id: ConceptId) -> Result<()> {
        let c = self.concept(id)?;
        if !c.is_user() {
            return Err(Error::ConceptInUse(c.name.clone(), "built-in concept".into()));
        }
        if let Some(user) = self
            .user_concepts()
            .find(|o| o.id != id && o.dims.iter().any(|d| d.domain == id))
        {
            return Err(Error::ConceptInUse(
                c.name.clone(),
                format!("referenced by `{}`", user.name),
            ));
        }
        let name = c.name.clone();
        self.names.remove(&name);
        self.concepts[id.0 as usize] = None;
        Ok(())
    }

    /// Test hook: appends a dimension without any validation.
    #[doc(hidden)]
    pub fn push_dimension_unchecked(&mut self, concept: ConceptId, dim: Dimension) -> Result<()> {
        self.concept_mut(concept)?.dims.push(dim);
        Ok(())
    }

    /// Concepts that are nobody's (non-direct) domain; these inherit into the bottom concept.
    pub fn bottom_parents(&self) -> Vec<ConceptId> {
        let used: HashSet<ConceptId> = self
            .user_concepts()
            .flat_map(|c| c.dims.iter().filter(|d| d.domain != c.id).map(|d| d.domain))
            .collect();
        let mut parents: Vec<&Concept> = self
            .user_concepts()
            .filter(|c| !used.contains(&c.id))
            .collect();
        parents.sort_by(|a, b| a.name.cmp(&b.name));
        parents.into_iter().map(|c| c.id).collect()
    }

    fn edges(&self, c: ConceptId) -> Vec<Edge<'_>> {
        let Ok(concept) = self.concept(c) else {
            return Vec::new();
        };
        match concept.kind {
            ConceptKind::User => concept
                .dims
                .iter()
                .filter(|d| !d.direct)
                .map(|d| Edge {
                    name: &d.name,
                    label: d.label(),
                    domain: d.domain,
                })
                .collect(),
            ConceptKind::Bottom => self
                .bottom_parents()
                .into_iter()
                .map(|p| {
                    let name = self.name(p);
                    Edge {
                        name,
                        label: name,
                        domain: p,
                    }
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn neighbors(&self, c: ConceptId, direction: Direction) -> Result<Vec<ConceptId>> {
        let concept = self.concept(c)?;
        let mut out: Vec<ConceptId> = Vec::new();
        match direction {
            Direction::Super => {
                if concept.kind == ConceptKind::Top {
                    return Ok(out);
                }
                for e in self.edges(c) {
                    if !out.contains(&e.domain) {
                        out.push(e.domain);
                    }
                }
                if out.is_empty() {
                    out.push(ConceptId::TOP);
                }
            }
            Direction::Sub => {
                if concept.kind == ConceptKind::Bottom {
                    return Ok(out);
                }
                let all: Vec<ConceptId> = self.concepts().map(|x| x.id).collect();
                for other in all {
                    if other == ConceptId::TOP {
                        continue;
                    }
                    let supers = self.neighbors(other, Direction::Super)?;
                    if supers.contains(&c) && !out.contains(&other) {
                        out.push(other);
                    }
                }
            }
        }
        Ok(out)
    }

    /// All paths (dimension sequences) leading upward from `from` to `to`.
    pub fn enumerate_paths(&self, from: ConceptId, to: ConceptId) -> Result<Vec<DimPath>> {
        self.concept(from)?;
        self.concept(to)?;
        let mut out = Vec::new();
        let mut steps = Vec::new();
        let mut on_stack = HashSet::new();
        self.paths_rec(from, from, &mut |c| c == to, &mut steps, &mut on_stack, &mut out);
        Ok(out)
    }

    fn paths_rec(
        &self,
        source: ConceptId,
        at: ConceptId,
        accept: &mut dyn FnMut(ConceptId) -> bool,
        steps: &mut Vec<String>,
        on_stack: &mut HashSet<ConceptId>,
        out: &mut Vec<DimPath>,
    ) {
        if accept(at) {
            out.push(DimPath {
                source,
                steps: steps.clone(),
                target: at,
            });
        }
        if !on_stack.insert(at) {
            return;
        }
        for e in self.edges(at) {
            if on_stack.contains(&e.domain) {
                continue;
            }
            steps.push(e.name.to_string());
            self.paths_rec(source, e.domain, accept, steps, on_stack, out);
            steps.pop();
        }
        on_stack.remove(&at);
    }

    /// All paths from `c` to primitive concepts, sorted by rendered path name.
    pub fn canonical_syntax(&self, c: ConceptId) -> Result<Vec<DimPath>> {
        let concept = self.concept(c)?;
        if concept.kind == ConceptKind::Top {
            return Err(Error::InvalidPath("the top concept has no canonical syntax".into()));
        }
        let mut out = Vec::new();
        let mut steps = Vec::new();
        let mut on_stack = HashSet::new();
        self.paths_rec(
            c,
            c,
            &mut |x| self.is_primitive(x),
            &mut steps,
            &mut on_stack,
            &mut out,
        );
        let mut keyed: Vec<(String, DimPath)> = out
            .into_iter()
            .map(|p| (self.path_name(&p), p))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.steps.cmp(&b.1.steps)));
        Ok(keyed.into_iter().map(|(_, p)| p).collect())
    }

    pub fn primitive_dimensionality(&self, c: ConceptId) -> Result<usize> {
        Ok(self.canonical_syntax(c)?.len())
    }

    /// Path rendered as dimension labels joined by `.`; elided steps are skipped.
    pub fn path_name(&self, path: &DimPath) -> String {
        let mut parts: Vec<&str> = Vec::new();
        let mut at = path.source;
        for step in &path.steps {
            let edges = self.edges(at);
            match edges.iter().find(|e| e.name == step) {
                Some(e) => {
                    if !e.label.is_empty() {
                        parts.push(e.label);
                    }
                    at = e.domain;
                }
                None => {
                    // Direct dimensions are navigable but are not edges.
                    match self
                        .concept(at)
                        .ok()
                        .and_then(|c| c.dim(step))
                        .map(|(_, d)| (d.label().to_string(), d.domain))
                    {
                        Some((_, dom)) => {
                            parts.push(step);
                            at = dom;
                        }
                        None => parts.push(step),
                    }
                }
            }
        }
        parts.join(".")
    }

    /// Validates dimension names step by step (direct dimensions included).
    pub fn check_path(&self, source: ConceptId, steps: &[String]) -> Result<DimPath> {
        let mut at = source;
        for step in steps {
            let c = self.concept(at)?;
            let (_, d) = c.dim(step).ok_or_else(|| {
                Error::InvalidPath(format!("`{}` has no dimension `{step}`", c.name))
            })?;
            at = d.domain;
        }
        Ok(DimPath {
            source,
            steps: steps.to_vec(),
            target: at,
        })
    }

    /// Matches the leading segments of a dotted path against the dimensions of
    /// `concept`. Dimension names may themselves contain dots (merged
    /// dimensions) and transparent dimensions are looked through. Returns the
    /// concrete dimension chain and the number of segments consumed.
    pub fn match_dims(&self, concept: ConceptId, segs: &[String]) -> Option<(Vec<String>, usize)> {
        let c = self.concept(concept).ok()?;
        for take in (1..=segs.len()).rev() {
            let joined = segs[..take].join(".");
            if let Some((_, d)) = c.dim(&joined) {
                if !d.is_transparent() || d.name == joined {
                    return Some((vec![d.name.clone()], take));
                }
            }
            if let Some(d) = c.dims.iter().find(|d| d.label() == joined && !d.label().is_empty()) {
                return Some((vec![d.name.clone()], take));
            }
        }
        for d in c.dims.iter().filter(|d| d.is_transparent()) {
            if self.is_primitive(d.domain) || d.domain == concept {
                continue;
            }
            if let Some((mut chain, used)) = self.match_dims(d.domain, segs) {
                chain.insert(0, d.name.clone());
                return Some((chain, used));
            }
        }
        None
    }

    /// Resolves a user-written dotted path to a concrete path.
    pub fn resolve_path(&self, source: ConceptId, segs: &[String]) -> Result<DimPath> {
        let mut at = source;
        let mut steps = Vec::new();
        let mut i = 0;
        while i < segs.len() {
            let (chain, used) = self.match_dims(at, &segs[i..]).ok_or_else(|| {
                Error::InvalidPath(format!(
                    "`{}` has no dimension `{}`",
                    self.name(at),
                    segs[i]
                ))
            })?;
            for name in chain {
                let (_, d) = self.concept(at)?.dim(&name).expect("matched dimension");
                at = d.domain;
                steps.push(name);
            }
            i += used;
        }
        Ok(DimPath {
            source,
            steps,
            target: at,
        })
    }

    /// True when `sub` reaches `sup` through non-direct dimensions (rank >= 0).
    pub fn is_subconcept_of(&self, sub: ConceptId, sup: ConceptId) -> bool {
        let mut stack = vec![sub];
        let mut seen = HashSet::new();
        while let Some(c) = stack.pop() {
            if c == sup {
                return true;
            }
            if seen.insert(c) {
                stack.extend(self.edges(c).into_iter().map(|e| e.domain));
            }
        }
        false
    }

    /// User concepts ordered supers first, ties broken by name.
    pub fn topological_order(&self) -> Vec<ConceptId> {
        let users: Vec<&Concept> = self.user_concepts().collect();
        let mut pending: HashMap<ConceptId, usize> = HashMap::new();
        for c in &users {
            let deps: HashSet<ConceptId> = c
                .dims
                .iter()
                .filter(|d| !d.direct && d.domain != c.id)
                .map(|d| d.domain)
                .filter(|d| self.concept(*d).map(|x| x.is_user()).unwrap_or(false))
                .collect();
            pending.insert(c.id, deps.len());
        }
        let mut ready: BTreeSet<(String, ConceptId)> = users
            .iter()
            .filter(|c| pending[&c.id] == 0)
            .map(|c| (c.name.clone(), c.id))
            .collect();
        let mut out = Vec::with_capacity(users.len());
        while let Some(first) = ready.iter().next().cloned() {
            ready.remove(&first);
            let id = first.1;
            out.push(id);
            for c in &users {
                let uses: HashSet<ConceptId> = c
                    .dims
                    .iter()
                    .filter(|d| !d.direct && d.domain != c.id)
                    .map(|d| d.domain)
                    .collect();
                if uses.contains(&id) {
                    let n = pending.get_mut(&c.id).unwrap();
                    *n -= 1;
                    if *n == 0 {
                        ready.insert((c.name.clone(), c.id));
                    }
                }
            }
        }
        // Anything left sits on a cycle; append by name so dumps stay total.
        let mut rest: Vec<&Concept> = users.into_iter().filter(|c| !out.contains(&c.id)).collect();
        rest.sort_by(|a, b| a.name.cmp(&b.name));
        out.extend(rest.into_iter().map(|c| c.id));
        out
    }

    /// Lists every broken schema invariant; empty when the schema is sound.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for c in self.concepts() {
            match c.kind {
                ConceptKind::Primitive(_) | ConceptKind::Top | ConceptKind::Bottom => {
                    if !c.dims.is_empty() {
                        out.push(Violation::PrimitiveWithDimensions(c.name.clone()));
                    }
                }
                ConceptKind::User => {
                    if c.dims.is_empty() {
                        out.push(Violation::EmptyIntent(c.name.clone()));
                    }
                    let mut seen = HashSet::new();
                    for d in &c.dims {
                        if !seen.insert(&d.name) {
                            out.push(Violation::DuplicateDimension {
                                concept: c.name.clone(),
                                dimension: d.name.clone(),
                            });
                        }
                        if !self.contains(d.domain)
                            || d.domain == ConceptId::TOP
                            || d.domain == ConceptId::BOTTOM
                        {
                            out.push(Violation::UnknownDomain {
                                concept: c.name.clone(),
                                dimension: d.name.clone(),
                            });
                        }
                    }
                }
            }
        }

        let mut graph: DiGraph<ConceptId, ()> = DiGraph::new();
        let mut index = HashMap::new();
        for c in self.user_concepts() {
            index.insert(c.id, graph.add_node(c.id));
        }
        for c in self.user_concepts() {
            for d in c.dims.iter().filter(|d| !d.direct) {
                if let Some(&to) = index.get(&d.domain) {
                    graph.add_edge(index[&c.id], to, ());
                }
            }
        }
        let mut cycles = Vec::new();
        for scc in tarjan_scc(&graph) {
            let self_loop = scc.len() == 1 && graph.contains_edge(scc[0], scc[0]);
            if scc.len() > 1 || self_loop {
                let members: HashSet<ConceptId> = scc.iter().map(|n| graph[*n]).collect();
                let mut start = *members.iter().min().unwrap();
                // Report the chain starting at the smallest id.
                let mut chain = Vec::new();
                let mut visited = HashSet::new();
                while visited.insert(start) {
                    let c = self.concept(start).unwrap();
                    let Some(d) = c
                        .dims
                        .iter()
                        .find(|d| !d.direct && members.contains(&d.domain))
                    else {
                        break;
                    };
                    chain.push(format!("{}.{} -> {}", c.name, d.name, self.name(d.domain)));
                    start = d.domain;
                }
                cycles.push(chain.join(", "));
            }
        }
        cycles.sort();
        out.extend(cycles.into_iter().map(Violation::CycleDetected));
        out
    }

    /// One DDL line for a user concept.
    pub fn ddl_line(&self, id: ConceptId) -> Result<String> {
        let c = self.concept(id)?;
        let dims: Vec<String> = c
            .dims
            .iter()
            .map(|d| {
                let mut s = format!("{}: {}", d.name, self.name(d.domain));
                if d.nullable {
                    s.push_str(" nullable");
                }
                if d.direct {
                    s.push_str(" direct");
                }
                match &d.label {
                    Some(l) if l.is_empty() => s.push_str(" transparent"),
                    Some(l) => s.push_str(&format!(" label {}", crate::value::quote_str(l))),
                    None => {}
                }
                s
            })
            .collect();
        let mut line = format!("concept {} {{ {} }}", c.name, dims.join(", "));
        if c.gc == GcScope::Local {
            line.push_str(" local");
        }
        if c.hidden {
            line.push_str(" hidden");
        }
        Ok(line)
    }

    /// Schema dump: one DDL line per user concept, in topological order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for id in self.topological_order() {
            out.push_str(&self.ddl_line(id).expect("listed concept"));
            out.push('\n');
        }
        out
    }
}

/// Parses `concept NAME { dim: Domain [nullable] [direct] [transparent] [label "x"], ... } [local] [hidden]`.
pub fn parse_ddl(line: &str) -> Result<ConceptDef> {
    let mut cur = Cursor::new(line)?;
    cur.expect_kw("concept")?;
    let name = cur.expect_ident()?;
    cur.expect_punct("{")?;
    let mut dims = Vec::new();
    if !cur.is_punct("}") {
        loop {
            // Dimension names produced by merging contain dots.
            let mut dname = cur.expect_ident()?;
            while cur.eat_punct(".") {
                dname.push('.');
                dname.push_str(&cur.expect_ident()?);
            }
            cur.expect_punct(":")?;
            let domain = cur.expect_ident()?;
            let mut def = DimDef::new(dname, domain);
            loop {
                if cur.eat_kw("nullable") {
                    def.nullable = true;
                } else if cur.eat_kw("direct") {
                    def.direct = true;
                } else if cur.eat_kw("transparent") {
                    def.label = Some(String::new());
                } else if cur.eat_kw("label") {
                    match cur.bump() {
                        Tok::Str(s) => def.label = Some(s),
                        _ => return Err(cur.error("string label")),
                    }
                } else {
                    break;
                }
            }
            dims.push(def);
            if !cur.eat_punct(",") {
                break;
            }
        }
    }
    cur.expect_punct("}")?;
    let mut def = ConceptDef::new(name, dims);
    loop {
        if cur.eat_kw("local") {
            def.gc = GcScope::Local;
        } else if cur.eat_kw("hidden") {
            def.hidden = true;
        } else {
            break;
        }
    }
    cur.expect_eof()?;
    Ok(def)
}
