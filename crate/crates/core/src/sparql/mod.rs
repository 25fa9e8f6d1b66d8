//! Conjunctive SPARQL fragment: parsing, synthesis, serialization, local
//! evaluation, and remote execution.
//!
//! The supported fragment is exactly basic graph patterns — `SELECT ?var` or
//! `CONSTRUCT` over a conjunction of triple patterns, with optional `PREFIX`
//! declarations, `;` predicate lists, and `.` separators. Everything else
//! (OPTIONAL, FILTER, UNION, property paths, literals, …) is a hard
//! [`SparqlError::Unsupported`] so that exotic queries are rejected rather
//! than silently mis-evaluated.
//!
//! Prefixes are resolved away at parse time: `wd:Q38` and plain `Q38` both
//! denote the bare id `Q38`. Ids that round-trip through query text must
//! match `[A-Za-z0-9_-]+`.

mod ast;
mod eval;
mod parser;
mod remote;
mod synth;
mod text;

pub use ast::{to_construct, QueryAst, QueryForm, Term, TriplePattern};
pub use eval::{eval_construct, eval_select};
pub use parser::parse_query;
pub use remote::{RemoteClient, RemoteConfig, RemoteError, RemoteResult};
pub use synth::{synthesize_query, SynthError};
pub use text::to_sparql_text;

use thiserror::Error;

/// Parse-time failure.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SparqlError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unsupported feature at line {line}, column {col}: {feature}")]
    Unsupported {
        feature: String,
        line: usize,
        col: usize,
    },
}

/// Evaluation-time failure.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("query form mismatch: expected {expected}")]
    WrongForm { expected: &'static str },
    #[error("SELECT must project exactly one variable, found {0}")]
    ProjectionArity(usize),
    #[error("projected variable ?{0} does not appear in the where clause")]
    UnboundProjection(String),
    #[error("template variable ?{0} does not appear in the where clause")]
    UnboundTemplateVar(String),
}
