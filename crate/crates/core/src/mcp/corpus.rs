//! Hostile inputs the server must survive: each yields a structured error
//! or a harmless result, and the server keeps answering afterwards.

use serde_json::{json, Value};

use super::MAX_MESSAGE_BYTES;

pub const CATEGORIES: [&str; 6] = [
    "malformed_json",
    "sql_injection",
    "shell_injection",
    "path_traversal",
    "redos",
    "oversized",
];

#[derive(Debug, Clone)]
pub struct Payload {
    pub category: &'static str,
    pub name: &'static str,
    /// One message, without the trailing newline.
    pub bytes: Vec<u8>,
}

fn call(tool: &str, arguments: Value) -> Vec<u8> {
    json!({
        "jsonrpc": "2.0",
        "id": 666,
        "method": "tools/call",
        "params": {"name": tool, "arguments": arguments},
    })
    .to_string()
    .into_bytes()
}

fn raw(s: &str) -> Vec<u8> {
    s.as_bytes().to_vec()
}

/// Payloads that reference `link_out` expect a symlink of that name in the
/// served repository pointing outside it.
pub fn adversarial_corpus() -> Vec<Payload> {
    let p = |category, name, bytes| Payload { category, name, bytes };
    let deep = format!("{}{}", "[".repeat(100_000), "]".repeat(100_000));
    let long_query = format!("MATCH (n) WHERE n.name = '{}' RETURN n", "a".repeat(70_000));
    let over_cap = format!(
        r#"{{"jsonrpc":"2.0","id":1,"method":"ping","params":{{"pad":"{}"}}}}"#,
        "x".repeat(MAX_MESSAGE_BYTES + 1024)
    );
    vec![
        // Malformed JSON and protocol abuse.
        p("malformed_json", "truncated_object", raw(r#"{"jsonrpc":"2.0","id":1,"method":"tools/list""#)),
        p("malformed_json", "not_json", raw("hello there")),
        p("malformed_json", "invalid_utf8", vec![b'{', 0xff, 0xfe, b'}']),
        p("malformed_json", "deep_nesting", deep.into_bytes()),
        p("malformed_json", "empty_batch", raw("[]")),
        p("malformed_json", "object_id", raw(r#"{"jsonrpc":"2.0","id":{"a":1},"method":"ping"}"#)),
        p(
            "malformed_json",
            "arguments_not_object",
            raw(r#"{"jsonrpc":"2.0","id":2,"method":"tools/call","params":{"name":"search_graph","arguments":"x"}}"#),
        ),
        p("malformed_json", "huge_number", raw(r#"{"jsonrpc":"2.0","id":1e999999,"method":"ping"}"#)),
        // SQL injection through every string that reaches the store.
        p(
            "sql_injection",
            "drop_table_suffix",
            call("query_graph", json!({"query": "MATCH (n) RETURN n; DROP TABLE nodes"})),
        ),
        p(
            "sql_injection",
            "attach_database",
            call("query_graph", json!({"query": "ATTACH DATABASE '/tmp/evil.db' AS evil"})),
        ),
        p(
            "sql_injection",
            "quote_breakout",
            call("query_graph", json!({"query": "MATCH (n) WHERE n.name = '' OR 1=1 --' RETURN n"})),
        ),
        p("sql_injection", "pattern_breakout", call("search_graph", json!({"pattern": "'; DROP TABLE nodes; --"}))),
        p("sql_injection", "qname_breakout", call("trace_call_path", json!({"function_name": "x' OR '1'='1"}))),
        p("sql_injection", "adr_id_string", call("manage_adr", json!({"action": "get", "id": "1 OR 1=1"}))),
        // Shell injection into the git subprocess.
        p("shell_injection", "command_substitution", call("detect_changes", json!({"base": "$(whoami)"}))),
        p("shell_injection", "separator", call("detect_changes", json!({"base": "HEAD; rm -rf /"}))),
        p("shell_injection", "backticks", call("detect_changes", json!({"base": "`id`"}))),
        p("shell_injection", "pipe", call("detect_changes", json!({"base": "HEAD | cat /etc/passwd"}))),
        p("shell_injection", "option_injection", call("detect_changes", json!({"base": "--output=/tmp/pwned"}))),
        // Reads outside the project root.
        p("path_traversal", "dot_dot", call("get_code_snippet", json!({"file_path": "../../etc/passwd"}))),
        p("path_traversal", "absolute", call("get_code_snippet", json!({"file_path": "/etc/passwd"}))),
        p("path_traversal", "nested_dot_dot", call("get_code_snippet", json!({"file_path": "pkg/../../../etc/shadow"}))),
        p("path_traversal", "symlink_escape", call("get_code_snippet", json!({"file_path": "link_out/secret.txt"}))),
        p("path_traversal", "nul_byte", call("get_code_snippet", json!({"file_path": "pkg/a.py\u{0}/../../etc/passwd"}))),
        // Catastrophic-backtracking patterns.
        p("redos", "nested_plus", call("search_graph", json!({"pattern": "(a+)+$"}))),
        p("redos", "alternation_star", call("search_code", json!({"pattern": "(a|aa)*b", "regex": true}))),
        p("redos", "counted_blowup", call("search_code", json!({"pattern": "(x{1000}){1000}", "regex": true}))),
        p("redos", "overlong_pattern", call("search_graph", json!({"pattern": "a".repeat(5000)}))),
        // Oversized inputs.
        p("oversized", "over_message_cap", over_cap.into_bytes()),
        p("oversized", "long_query", call("query_graph", json!({"query": long_query}))),
        p("oversized", "many_files", call("detect_changes", json!({"files": vec!["a.py"; 20_000]}))),
        p("oversized", "huge_trace_count", call("ingest_traces", json!({"traces": "{\"caller_qname\":\"a\",\"callee_qname\":\"b\",\"count\":18446744073709551615}"}))),
    ]
}
