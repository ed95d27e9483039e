use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Source position inside query or DDL text, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("name `{0}` is already in use")]
    DuplicateName(String),
    #[error("unknown domain `{domain}` for dimension `{dimension}`")]
    UnknownDomain { dimension: String, domain: String },
    #[error("cycle detected: {0}")]
    CycleDetected(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("invalid concept definition: {0}")]
    InvalidConcept(String),
    #[error("`{sup}` is not a direct superconcept of `{sub}`")]
    NotDirectSuper { sup: String, sub: String },
    #[error("`{0}` is primitive and cannot be merged")]
    PrimitiveDomain(String),
    #[error("bad dimension subset: {0}")]
    BadDimensionSubset(String),
    #[error("cannot remove concept `{0}`: {1}")]
    ConceptInUse(String, String),

    #[error("arity mismatch for `{concept}`: expected {expected} values, got {got}")]
    ArityMismatch {
        concept: String,
        expected: usize,
        got: usize,
    },
    #[error("domain violation in slot `{slot}`: expected a value of `{expected}`")]
    DomainViolation { slot: String, expected: String },
    #[error("null is not allowed for dimension `{0}`")]
    NullForbidden(String),
    #[error("constraint `{0}` violated")]
    ConstraintViolation(String),
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("dangling reference {0}")]
    DanglingReference(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("unknown dimension `{dimension}` in `{concept}`")]
    UnknownDimension { concept: String, dimension: String },

    #[error("syntax error at {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: Position,
        expected: String,
        found: String,
    },
    #[error("type error: {0}")]
    Type(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("unknown property `{0}`")]
    UnknownProperty(String),
    #[error("unbound block variable `{0}`")]
    UnboundBlockVariable(String),
    #[error("view `{0}` is immutable")]
    ViewImmutable(String),
    #[error("ambiguous or missing parent for restriction `{0}`; write it as `{0} = <param>`")]
    AmbiguousRestriction(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("link {src} -> {tgt} already exists")]
    DuplicateLink { src: String, tgt: String },
    #[error("link {src} -> {tgt} does not exist")]
    UnknownLink { src: String, tgt: String },

    #[error("snapshots have different canonical syntax")]
    IncomparableSchemas,
    #[error("invalid axis path: {0}")]
    InvalidAxisPath(String),
    #[error("no such level: {0}")]
    NoSuchLevel(String),
    #[error("no common subconcept for the inference inputs and `{0}`")]
    NoCommonSubconcept(String),
    #[error("invalid tree spec: {0}")]
    InvalidTreeSpec(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: dangling reference {item}")]
    DanglingAt { line: usize, item: String },
}

impl Error {
    pub(crate) fn syntax(pos: Position, expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::Syntax {
            pos,
            expected: expected.into(),
            found: found.into(),
        }
    }
}
