//! Read-only structural queries over a persisted graph.

mod analysis;
pub mod cypher;
mod exec;
mod search;
mod trace;

use rusqlite::Row;
use serde::{Deserialize, Serialize};

use crate::graph::EdgeType;

pub use analysis::{
    architecture_summary, detect_dead_code, graph_schema, top_hubs, ArchitectureSummary, CommunityLink,
    CommunitySummary, GraphSchema, Hub, SchemaEntry, DEFAULT_HUBS,
};
pub use cypher::{parse_query, QueryAst, MAX_QUERY_BYTES};
pub use exec::{
    compare, edge_column, execute_ast, execute_query, node_column, register_functions, QueryResult, Scalar,
    ROW_CEILING,
};
pub use search::{compile_pattern, indexed_files, search_code, search_symbols, CodeMatch, MAX_PATTERN_BYTES};
pub use trace::{
    find_symbol, impact_analysis, resolve_changed, suggestions, trace_call_path, CallPath, ImpactEntry, ImpactReport,
    TraceDirection, TraceStep, MAX_TRACE_DEPTH,
};

/// Compact node description used by every query result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub id: i64,
    pub label: String,
    pub qualified_name: String,
    pub simple_name: String,
    pub file_path: String,
    pub start_line: u32,
    pub end_line: u32,
}

impl NodeSummary {
    pub(crate) const COLUMNS: &'static str = "id, label, qualified_name, simple_name, file_path, start_line, end_line";
    pub(crate) const WIDTH: usize = 7;

    pub(crate) fn prefixed(alias: &str) -> String {
        Self::COLUMNS
            .split(", ")
            .map(|c| format!("{alias}.{c}"))
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub(crate) fn from_row(r: &Row<'_>) -> rusqlite::Result<Self> {
        Ok(NodeSummary {
            id: r.get(0)?,
            label: r.get(1)?,
            qualified_name: r.get(2)?,
            simple_name: r.get(3)?,
            file_path: r.get(4)?,
            start_line: r.get(5)?,
            end_line: r.get(6)?,
        })
    }
}

pub(crate) fn call_type_list() -> String {
    EdgeType::CALL_FAMILY
        .iter()
        .map(|t| format!("'{}'", t.as_str()))
        .collect::<Vec<_>>()
        .join(", ")
}
