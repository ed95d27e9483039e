//! Query language: syntax tree, parser, printer and evaluator.

pub mod ast;
pub mod parser;
pub mod eval;
pub mod printer;

pub use ast::{Expr, Query};
pub use eval::{Params, ResultSet};
pub use parser::{parse_const, parse_data_line, parse_expr, parse_query, DataLine};
