//! flowlatin: a self-contained NetFlow v5 traffic-analysis engine.
//!
//! The pieces, bottom up:
//!
//! - [`flow_model`]: v5 datagram and text-capture parsing, plus the three
//!   per-record section tables analyses run over.
//! - [`data_model`]: the atom/tuple/bag value system and typed schemas.
//! - [`script_lang`]: lexer and parser for the miniature dataflow language,
//!   producing a logical plan, plus schema inference.
//! - [`planner`]: compiles logical plans into a graph of map/reduce jobs and
//!   inserts combiners for algebraic aggregates.
//! - [`mr_engine`]: a deterministic local parallel map-reduce runtime.
//! - [`netflow_analyses`]: per-interface, per-IP, per-protocol and per-node
//!   traffic reports, each available directly and as a generated script.
//! - [`bench`]: the script-vs-handwritten word-count benchmark harness.
//! - [`cli`]: the `flowlatin` command-line front end.

pub mod bench;
pub mod cli;
pub mod data_model;
pub(crate) mod eval;
pub mod flow_model;
pub mod mr_engine;
pub mod netflow_analyses;
pub mod planner;
pub mod script_lang;
