//! Code knowledge-graph engine.
//!
//! Indexes a repository into a typed property graph stored in a single
//! SQLite file, keeps it in sync incrementally and answers structural
//! queries for the CLI and the MCP tool server.

pub mod bench;
pub mod community;
pub mod error;
pub mod graph;
pub mod lang;
pub mod mcp;
pub mod par;
pub mod pipeline;
pub mod query;
pub mod resolve;
pub mod sanitize;
pub mod store;
pub mod sync;

pub use error::{Error, Result};
