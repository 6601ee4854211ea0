//! Declared input schemas for the 14 tools.

use serde_json::{json, Map, Value};

use crate::query::{MAX_PATTERN_BYTES, MAX_QUERY_BYTES, MAX_TRACE_DEPTH};

/// Cap on any string argument without a tighter limit of its own.
pub const MAX_STRING_BYTES: usize = 64 * 1024;
/// Cap on array arguments.
pub const MAX_ARRAY_ITEMS: usize = 10_000;
/// Cap on the `traces` payload of `ingest_traces`.
pub const MAX_TRACE_PAYLOAD_BYTES: usize = 2 * 1024 * 1024;
pub const MAX_RESULT_LIMIT: u64 = 1000;

pub const TOOL_NAMES: [&str; 14] = [
    "index_repository",
    "index_status",
    "list_projects",
    "delete_project",
    "search_graph",
    "trace_call_path",
    "query_graph",
    "ingest_traces",
    "detect_changes",
    "get_graph_schema",
    "get_architecture",
    "get_code_snippet",
    "search_code",
    "manage_adr",
];

fn string(max: usize, description: &str) -> Value {
    // maxLength counts characters; byte caps are re-checked after parsing.
    json!({"type": "string", "maxLength": max, "description": description})
}

fn strings(description: &str) -> Value {
    json!({
        "type": "array",
        "maxItems": MAX_ARRAY_ITEMS,
        "items": {"type": "string", "maxLength": MAX_STRING_BYTES},
        "description": description,
    })
}

fn integer(min: u64, max: u64, description: &str) -> Value {
    json!({"type": "integer", "minimum": min, "maximum": max, "description": description})
}

fn boolean(description: &str) -> Value {
    json!({"type": "boolean", "description": description})
}

fn object(props: Vec<(&str, Value)>, required: &[&str]) -> Value {
    let mut properties = Map::new();
    properties.insert(
        "repo_root".to_string(),
        string(MAX_STRING_BYTES, "Repository directory; defaults to the server root."),
    );
    for (k, v) in props {
        properties.insert(k.to_string(), v);
    }
    json!({
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": false,
    })
}

fn limit() -> Value {
    integer(1, MAX_RESULT_LIMIT, "Maximum number of results (default 50).")
}

pub fn input_schema(tool: &str) -> Option<Value> {
    let schema = match tool {
        "index_repository" => object(
            vec![
                ("project", string(256, "Project name; defaults to the directory name.")),
                ("wait", boolean("Block until indexing finishes.")),
                ("watch", boolean("Keep the graph in sync with the working tree afterwards.")),
                ("languages", strings("Language allow-list (python, go, c).")),
                ("ignore", strings("Extra glob patterns to skip.")),
                ("cochange", boolean("Read version-control history for co-change edges (default true).")),
            ],
            &[],
        ),
        "index_status" | "delete_project" | "get_graph_schema" => object(vec![], &[]),
        "list_projects" => json!({"type": "object", "properties": {}, "additionalProperties": false}),
        "search_graph" => object(
            vec![
                ("pattern", string(MAX_PATTERN_BYTES, "Regular expression over simple and qualified names.")),
                ("label", string(64, "Restrict to one node label.")),
                ("limit", limit()),
            ],
            &["pattern"],
        ),
        "trace_call_path" => object(
            vec![
                ("function_name", string(MAX_STRING_BYTES, "Qualified name of the root function.")),
                (
                    "direction",
                    json!({"type": "string", "enum": ["inbound", "outbound"], "description": "Callers or callees (default outbound)."}),
                ),
                ("depth", integer(1, MAX_TRACE_DEPTH as u64, "Maximum hops (default 3).")),
            ],
            &["function_name"],
        ),
        "query_graph" => object(
            vec![("query", string(MAX_QUERY_BYTES, "Single MATCH ... RETURN statement."))],
            &["query"],
        ),
        "ingest_traces" => object(
            vec![(
                "traces",
                string(
                    MAX_TRACE_PAYLOAD_BYTES,
                    "JSON lines of {\"caller_qname\", \"callee_qname\", \"count\"}.",
                ),
            )],
            &["traces"],
        ),
        "detect_changes" => object(
            vec![
                ("base", string(256, "Git revision to diff the working tree against (default HEAD).")),
                ("files", strings("Changed files or qualified names; skips the git diff when given.")),
                ("depth", integer(1, MAX_TRACE_DEPTH as u64, "Caller hops to follow (default 3).")),
            ],
            &[],
        ),
        "get_architecture" => object(vec![("hubs", integer(1, 100, "Hubs per community (default 5)."))], &[]),
        "get_code_snippet" => object(
            vec![
                ("qualified_name", string(MAX_STRING_BYTES, "Symbol whose source span to return.")),
                ("file_path", string(MAX_STRING_BYTES, "Repository-relative file path.")),
                ("start_line", integer(1, u32::MAX as u64, "First line, 1-based.")),
                ("end_line", integer(1, u32::MAX as u64, "Last line, inclusive.")),
            ],
            &[],
        ),
        "search_code" => object(
            vec![
                ("pattern", string(MAX_PATTERN_BYTES, "Text to find; a regular expression when regex is true.")),
                ("regex", boolean("Treat pattern as a regular expression.")),
                ("limit", limit()),
            ],
            &["pattern"],
        ),
        "manage_adr" => object(
            vec![
                (
                    "action",
                    json!({"type": "string", "enum": ["create", "list", "get"]}),
                ),
                ("id", integer(1, i64::MAX as u64, "ADR id for get.")),
                ("title", string(1024, "Title for create.")),
                ("status", string(64, "Status for create (default proposed).")),
                ("body", string(MAX_STRING_BYTES, "Markdown body for create.")),
            ],
            &["action"],
        ),
        _ => return None,
    };
    Some(schema)
}

pub fn description(tool: &str) -> &'static str {
    match tool {
        "index_repository" => "Index a repository into the knowledge graph (runs in the background).",
        "index_status" => "Poll indexing progress and the stored graph size.",
        "list_projects" => "List indexed projects.",
        "delete_project" => "Delete a project's graph store.",
        "search_graph" => "Find symbols by name pattern.",
        "trace_call_path" => "Breadth-first call trace from a function, callers or callees.",
        "query_graph" => "Run a read-only Cypher-like MATCH query.",
        "ingest_traces" => "Store runtime call traces as observed CALLS edges.",
        "detect_changes" => "Map changed files to symbols and their transitive callers.",
        "get_graph_schema" => "Node labels, edge types, counts and property keys.",
        "get_architecture" => "Communities, their hubs and the links between them.",
        "get_code_snippet" => "Source text of a symbol or a line range.",
        "search_code" => "Line search over the indexed files.",
        "manage_adr" => "Create, list or read architecture decision records.",
        _ => "",
    }
}

/// The tool listing published by `tools/list`.
pub fn tool_listing() -> Vec<Value> {
    TOOL_NAMES
        .iter()
        .map(|name| {
            json!({
                "name": name,
                "description": description(name),
                "inputSchema": input_schema(name).expect("every listed tool has a schema"),
            })
        })
        .collect()
}
