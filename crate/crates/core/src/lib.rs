//! An embeddable in-memory concept-oriented database engine.

pub mod analytics;
pub mod canonical;
pub mod database;
pub mod error;
pub mod lex;
pub mod query;
pub mod schema;
pub mod snapshot;
pub mod store;
pub mod transform;
pub mod value;

pub use database::Database;
pub use error::{Error, Result};
pub use schema::{ConceptId, DimPath, Dimension, Schema};
pub use value::{ItemRef, Value};
