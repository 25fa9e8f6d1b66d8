//! Toolkit for building and evaluating multi-hop KGQA datasets over labeled
//! knowledge graphs.
//!
//! The crate is organized around a small set of immutable core types
//! ([`types`]) and a pipeline of independent stages:
//!
//! * [`kg`] — load a knowledge graph from TSV sources, serve degree/neighbor
//!   queries, sample seed subgraphs, and extract k-hop neighborhoods.
//! * [`sparql`] — parse, synthesize, serialize, and evaluate the conjunctive
//!   SPARQL fragment used throughout, locally or against a remote endpoint.
//! * [`gateway`] — prompt construction, chat-completion providers (HTTP and
//!   deterministic replay), proposal parsing, paraphrasing, and answerability
//!   judging.
//! * [`taxonomy`] — answer-tree constraint checks, canonical isomorphism
//!   codes, hop counting, redundancy analysis, and generalization tags.
//! * [`pipeline`] — candidate generation/validation orchestration with
//!   machine-checkable rejection reasons.
//! * [`analysis`] — personalized PageRank, question-specific retrieval
//!   graphs, shortest-path analytics, and supervision exports.
//! * [`evalkit`] — answer/triple scoring and grouped report aggregation.
//! * [`records`], [`split`], [`stats`], [`config`] — dataset record IO in the
//!   published schema, split design/validation, statistics, and configuration.

pub mod analysis;
pub mod config;
pub mod evalkit;
pub mod gateway;
pub mod kg;
pub mod pipeline;
pub mod records;
pub mod sparql;
pub mod split;
pub mod stats;
pub mod taxonomy;
pub mod types;
