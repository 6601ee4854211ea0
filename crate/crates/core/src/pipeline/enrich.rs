//! Phase 4: edges derived from the resolved graph and from outside the
//! source text (test links, routes, version-control co-change, runtime
//! traces, interface satisfaction).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{EdgeType, GraphBuffer, GraphNode, NodeLabel, Properties, TempId};
use crate::lang::FileExtraction;
use crate::resolve::types::TypeRegistry;
use crate::sanitize::validate_shell_arg;
use crate::store::TraceRecord;

use super::assemble::Claims;

/// Commits inspected for co-change.
pub const COCHANGE_COMMITS: usize = 1000;
/// Minimum co-occurrences for a FILE_CHANGES_WITH edge.
pub const COCHANGE_MIN: u32 = 3;
/// Commits touching more files than this (mass renames, vendoring) are
/// ignored.
pub const COCHANGE_MAX_FILES: usize = 50;
/// Lowest call confidence that counts as evidence for a TESTS edge.
pub const TESTS_MIN_CONFIDENCE: f64 = 0.75;
pub const IMPLEMENTS_CONFIDENCE: f64 = 0.9;

fn is_test_node(n: &GraphNode) -> bool {
    n.properties.get("is_test").is_some_and(|v| v == "true")
}

/// TESTS edges from test definitions to the non-test definitions they call.
pub fn tests_edges(buffer: &mut GraphBuffer) -> Result<usize> {
    let mut found = Vec::new();
    for e in buffer.edges() {
        if e.edge_type != EdgeType::Calls || e.confidence < TESTS_MIN_CONFIDENCE {
            continue;
        }
        let (s, d) = (buffer.node(e.src), buffer.node(e.dst));
        if is_test_node(s) && !is_test_node(d) && d.label.is_callable() {
            found.push((e.src, e.dst, e.confidence));
        }
    }
    for &(s, d, c) in &found {
        buffer.add_edge(s, d, EdgeType::Tests, c)?;
    }
    Ok(found.len())
}

pub fn route_qname(method: &str, path: &str) -> String {
    format!("route:{method} {path}")
}

/// Route nodes and HANDLES edges (Route → handler).
pub fn route_edges(buffer: &mut GraphBuffer, files: &[FileExtraction], claims: &Claims) -> Result<usize> {
    let mut n = 0;
    for (f, ext) in files.iter().enumerate() {
        for r in &ext.routes {
            let Some(handler) = claims.qnames[f].get(r.handler).cloned().flatten() else { continue };
            let Some(h) = buffer.lookup(&handler) else { continue };
            let q = route_qname(&r.method, &r.path);
            let mut node = GraphNode::new(NodeLabel::Route, q.as_str())
                .with_simple_name(format!("{} {}", r.method, r.path))
                .with_file(ext.path.as_str(), r.span);
            node.properties.insert("method".into(), r.method.clone());
            node.properties.insert("path".into(), r.path.clone());
            let id = match buffer.lookup(&q) {
                Some(id) => id,
                None => buffer.add_node(node)?,
            };
            buffer.add_edge(id, h, EdgeType::Handles, 1.0)?;
            n += 1;
        }
    }
    Ok(n)
}

/// A file pair that changed together, with the pair in path order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoChange {
    pub a: String,
    pub b: String,
    pub count: u32,
}

/// Counts co-changing file pairs from `git log`. Returns an empty list when
/// the directory is not under version control or git is unavailable.
pub fn git_cochange(repo_root: &Path) -> Vec<CoChange> {
    let root = repo_root.to_string_lossy().into_owned();
    let args = [
        "-C".to_string(),
        root,
        "log".to_string(),
        format!("--max-count={COCHANGE_COMMITS}"),
        "--name-only".to_string(),
        "--no-renames".to_string(),
        "--relative".to_string(),
        "--pretty=format:@@commit".to_string(),
    ];
    if !args.iter().all(|a| validate_shell_arg(a)) {
        tracing::warn!("co-change skipped: repository path rejected by argument validation");
        return Vec::new();
    }
    let output = match Command::new("git").args(&args).env("GIT_TERMINAL_PROMPT", "0").output() {
        Ok(o) if o.status.success() => o.stdout,
        _ => return Vec::new(),
    };
    cochange_from_log(&String::from_utf8_lossy(&output))
}

/// Parses `--name-only` log output separated by `@@commit` markers.
pub fn cochange_from_log(log: &str) -> Vec<CoChange> {
    let mut counts: BTreeMap<(String, String), u32> = BTreeMap::new();
    for commit in log.split("@@commit") {
        let files: BTreeSet<&str> = commit.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if files.len() < 2 || files.len() > COCHANGE_MAX_FILES {
            continue;
        }
        let files: Vec<&str> = files.into_iter().collect();
        for i in 0..files.len() {
            for j in i + 1..files.len() {
                *counts.entry((files[i].to_string(), files[j].to_string())).or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .filter(|(_, c)| *c >= COCHANGE_MIN)
        .map(|((a, b), count)| CoChange { a, b, count })
        .collect()
}

/// FILE_CHANGES_WITH edges between indexed files, in both directions.
pub fn cochange_edges(buffer: &mut GraphBuffer, pairs: &[CoChange]) -> Result<usize> {
    let mut n = 0;
    for p in pairs {
        let (Some(a), Some(b)) = (
            buffer.lookup(&super::structure::file_qname(&p.a)),
            buffer.lookup(&super::structure::file_qname(&p.b)),
        ) else {
            continue;
        };
        let props = Properties::from([("co_changes".to_string(), p.count.to_string())]);
        buffer.add_edge_with(a, b, EdgeType::FileChangesWith, 1.0, props.clone())?;
        buffer.add_edge_with(b, a, EdgeType::FileChangesWith, 1.0, props)?;
        n += 2;
    }
    Ok(n)
}

/// Runtime-observed CALLS edges for trace records whose endpoints exist.
pub fn trace_edges(buffer: &mut GraphBuffer, traces: &[TraceRecord]) -> Result<usize> {
    let mut n = 0;
    for t in traces {
        let (Some(s), Some(d)) = (buffer.lookup(&t.caller_qname), buffer.lookup(&t.callee_qname)) else {
            continue;
        };
        if !buffer.node(s).label.is_callable() || !buffer.node(d).label.is_callable() {
            continue;
        }
        let props = Properties::from([
            ("runtime_observed".to_string(), "true".to_string()),
            ("trace_count".to_string(), t.count.to_string()),
        ]);
        buffer.add_edge_with(s, d, EdgeType::Calls, 1.0, props)?;
        n += 1;
    }
    Ok(n)
}

/// IMPLEMENTS edges from concrete types to every non-empty interface whose
/// method set they cover (structural typing).
pub fn implements_edges(buffer: &mut GraphBuffer, registry: Option<&TypeRegistry>) -> Result<usize> {
    let Some(reg) = registry else { return Ok(0) };
    let mut interfaces: Vec<(&String, TempId)> = Vec::new();
    let mut concrete: Vec<(&String, TempId)> = Vec::new();
    for (name, info) in &reg.types {
        if info.stub {
            continue;
        }
        let Some(id) = buffer.lookup(name) else { continue };
        if info.is_interface {
            interfaces.push((name, id));
        } else if info.alias_of.is_none() {
            concrete.push((name, id));
        }
    }
    interfaces.sort();
    concrete.sort();
    let mut found = Vec::new();
    for (iname, iid) in &interfaces {
        let needed = reg.method_set(iname);
        if needed.is_empty() {
            continue;
        }
        for (cname, cid) in &concrete {
            let have = reg.method_set(cname);
            if needed.iter().all(|m| have.contains(m)) {
                found.push((*cid, *iid));
            }
        }
    }
    for &(c, i) in &found {
        buffer.add_edge(c, i, EdgeType::Implements, IMPLEMENTS_CONFIDENCE)?;
    }
    Ok(found.len())
}
