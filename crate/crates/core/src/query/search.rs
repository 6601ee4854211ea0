use std::path::Path;

use regex::{Regex, RegexBuilder};
use rusqlite::{params, Connection};
use serde::{Deserialize, Serialize};

use super::NodeSummary;
use crate::error::{Error, Result};
use crate::sanitize::contained_path;

/// Longest accepted pattern, in bytes.
pub const MAX_PATTERN_BYTES: usize = 4096;
const REGEX_SIZE_LIMIT: usize = 1 << 20;
const EXCERPT_CHARS: usize = 240;

/// Compiles a user pattern with the linear-time engine and bounded program
/// size, so no input can trigger catastrophic backtracking.
pub fn compile_pattern(pattern: &str, literal: bool) -> Result<Regex> {
    if pattern.len() > MAX_PATTERN_BYTES {
        return Err(Error::Pattern(format!("pattern exceeds {MAX_PATTERN_BYTES} bytes")));
    }
    let source = if literal { regex::escape(pattern) } else { pattern.to_string() };
    RegexBuilder::new(&source)
        .size_limit(REGEX_SIZE_LIMIT)
        .dfa_size_limit(REGEX_SIZE_LIMIT)
        .build()
        .map_err(|e| Error::Pattern(e.to_string()))
}

fn is_exact(re: &Regex, name: &str) -> bool {
    re.find(name).is_some_and(|m| m.start() == 0 && m.end() == name.len())
}

/// Nodes whose simple or qualified name matches `pattern`. Whole-name
/// matches on the simple name come first, then shorter qualified names,
/// then lower ids.
pub fn search_symbols(conn: &Connection, pattern: &str, label: Option<&str>, limit: usize) -> Result<Vec<NodeSummary>> {
    let re = compile_pattern(pattern, false)?;
    let sql = format!(
        "SELECT {} FROM nodes WHERE ?1 IS NULL OR label = ?1 ORDER BY id",
        NodeSummary::COLUMNS
    );
    let mut stmt = conn.prepare_cached(&sql)?;
    let mut hits: Vec<(bool, NodeSummary)> = Vec::new();
    let mut rows = stmt.query(params![label])?;
    while let Some(row) = rows.next()? {
        let n = NodeSummary::from_row(row)?;
        if re.is_match(&n.simple_name) || re.is_match(&n.qualified_name) {
            hits.push((is_exact(&re, &n.simple_name), n));
        }
    }
    hits.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then_with(|| a.1.qualified_name.len().cmp(&b.1.qualified_name.len()))
            .then_with(|| a.1.id.cmp(&b.1.id))
    });
    Ok(hits.into_iter().take(limit).map(|(_, n)| n).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeMatch {
    pub file: String,
    /// 1-based.
    pub line: usize,
    pub excerpt: String,
}

/// Repository-relative paths of all indexed files, sorted.
pub fn indexed_files(conn: &Connection) -> Result<Vec<String>> {
    let mut stmt = conn.prepare_cached("SELECT file_path FROM nodes WHERE label = 'File' ORDER BY file_path")?;
    let rows = stmt
        .query_map([], |r| r.get(0))?
        .collect::<rusqlite::Result<Vec<String>>>()?;
    Ok(rows)
}

fn excerpt(line: &str) -> String {
    let t = line.trim();
    match t.char_indices().nth(EXCERPT_CHARS) {
        Some((i, _)) => format!("{}...", &t[..i]),
        None => t.to_string(),
    }
}

/// Line-oriented search over the indexed files under `repo_root`, in
/// (path, line) order.
pub fn search_code(
    conn: &Connection,
    repo_root: &Path,
    needle: &str,
    regex: bool,
    limit: usize,
) -> Result<Vec<CodeMatch>> {
    let re = compile_pattern(needle, !regex)?;
    let mut out = Vec::new();
    for rel in indexed_files(conn)? {
        let Ok(path) = contained_path(repo_root, &rel) else { continue };
        let Ok(bytes) = std::fs::read(&path) else { continue };
        let text = String::from_utf8_lossy(&bytes);
        for (i, line) in text.lines().enumerate() {
            if out.len() >= limit {
                return Ok(out);
            }
            if re.is_match(line) {
                out.push(CodeMatch {
                    file: rel.clone(),
                    line: i + 1,
                    excerpt: excerpt(line),
                });
            }
        }
    }
    Ok(out)
}
