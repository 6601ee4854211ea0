use std::collections::{BTreeMap, HashMap, HashSet};

use rusqlite::{params, Connection, OptionalExtension};
use serde::{Deserialize, Serialize};

use super::{call_type_list, NodeSummary};
use crate::error::{Error, Result};
use crate::resolve::normalized_similarity;

pub const MAX_TRACE_DEPTH: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceDirection {
    Outbound,
    Inbound,
}

impl std::str::FromStr for TraceDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "outbound" | "out" | "callees" => Ok(TraceDirection::Outbound),
            "inbound" | "in" | "callers" => Ok(TraceDirection::Inbound),
            _ => Err(Error::validation(format!("direction must be inbound or outbound, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub depth: u32,
    pub node: NodeSummary,
    /// Highest confidence among the edges that reach this node from the
    /// previous layer.
    pub confidence: f64,
    /// Qualified name of the previous-layer node behind `confidence`.
    pub via: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallPath {
    pub root: NodeSummary,
    pub direction: TraceDirection,
    pub max_depth: u32,
    /// Ordered by depth, then node id.
    pub layers: Vec<TraceStep>,
}

/// Finds the node for a qualified name, preferring callables.
pub fn find_symbol(conn: &Connection, qname: &str) -> Result<Option<NodeSummary>> {
    let sql = format!(
        "SELECT {} FROM nodes WHERE qualified_name = ?1
         ORDER BY CASE label WHEN 'Function' THEN 0 WHEN 'Method' THEN 0 ELSE 1 END, id LIMIT 1",
        NodeSummary::COLUMNS
    );
    Ok(conn
        .query_row(&sql, params![qname], NodeSummary::from_row)
        .optional()?)
}

/// Up to `k` qualified names that look like `name`, best first.
pub fn suggestions(conn: &Connection, name: &str, k: usize) -> Result<Vec<String>> {
    let last = name.rsplit(['.', '/', ':']).next().unwrap_or(name);
    let mut stmt = conn.prepare_cached(
        "SELECT qualified_name, simple_name FROM nodes
         WHERE label IN ('Function', 'Method', 'Class', 'Interface', 'Enum', 'Type')",
    )?;
    let mut scored: Vec<(f64, String)> = stmt
        .query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))?
        .filter_map(|r| r.ok())
        .map(|(q, s)| {
            let score = normalized_similarity(&q, name).max(normalized_similarity(&s, last));
            (score, q)
        })
        .filter(|(s, _)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    scored.dedup_by(|a, b| a.1 == b.1);
    Ok(scored.into_iter().take(k).map(|(_, q)| q).collect())
}

fn not_found(conn: &Connection, qname: &str) -> Error {
    Error::NotFound {
        what: format!("symbol {qname:?}"),
        suggestions: suggestions(conn, qname, 5).unwrap_or_default(),
    }
}

/// Per-layer neighbour lookup over the call family. Returns
/// `(neighbour id, confidence)` for every edge, in edge-id order.
pub(crate) struct Neighbours<'c> {
    stmt: rusqlite::CachedStatement<'c>,
}

impl<'c> Neighbours<'c> {
    pub(crate) fn new(conn: &'c Connection, direction: TraceDirection) -> Result<Self> {
        let (from, to) = match direction {
            TraceDirection::Outbound => ("src", "dst"),
            TraceDirection::Inbound => ("dst", "src"),
        };
        let sql = format!(
            "SELECT {to}, confidence FROM edges WHERE {from} = ?1 AND type IN ({}) ORDER BY id",
            call_type_list()
        );
        Ok(Neighbours {
            stmt: conn.prepare_cached(&sql)?,
        })
    }

    pub(crate) fn of(&mut self, id: i64) -> Result<Vec<(i64, f64)>> {
        let rows = self
            .stmt
            .query_map(params![id], |r| Ok((r.get(0)?, r.get(1)?)))?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(rows)
    }
}

pub(crate) fn summaries(conn: &Connection, ids: impl IntoIterator<Item = i64>) -> Result<HashMap<i64, NodeSummary>> {
    let mut stmt = conn.prepare_cached(&format!("SELECT {} FROM nodes WHERE id = ?1", NodeSummary::COLUMNS))?;
    let mut out = HashMap::new();
    for id in ids {
        if let Some(n) = stmt.query_row(params![id], NodeSummary::from_row).optional()? {
            out.insert(id, n);
        }
    }
    Ok(out)
}

/// Breadth-first traversal of the call graph from `root_qname`.
pub fn trace_call_path(
    conn: &Connection,
    root_qname: &str,
    direction: TraceDirection,
    max_depth: u32,
) -> Result<CallPath> {
    if !(1..=MAX_TRACE_DEPTH).contains(&max_depth) {
        return Err(Error::validation(format!("depth must be between 1 and {MAX_TRACE_DEPTH}")));
    }
    let root = find_symbol(conn, root_qname)?.ok_or_else(|| not_found(conn, root_qname))?;
    let mut next = Neighbours::new(conn, direction)?;
    let mut visited: HashSet<i64> = HashSet::from([root.id]);
    let mut frontier = vec![root.id];
    // node -> (depth, confidence, parent)
    let mut found: BTreeMap<(u32, i64), (f64, i64)> = BTreeMap::new();
    for depth in 1..=max_depth {
        let mut layer: BTreeMap<i64, (f64, i64)> = BTreeMap::new();
        for &u in &frontier {
            for (v, conf) in next.of(u)? {
                if visited.contains(&v) {
                    continue;
                }
                let slot = layer.entry(v).or_insert((conf, u));
                if conf > slot.0 {
                    *slot = (conf, u);
                }
            }
        }
        if layer.is_empty() {
            break;
        }
        frontier = layer.keys().copied().collect();
        for (v, (conf, parent)) in layer {
            visited.insert(v);
            found.insert((depth, v), (conf, parent));
        }
    }
    let mut ids: Vec<i64> = found.keys().map(|(_, v)| *v).collect();
    ids.extend(found.values().map(|(_, p)| *p));
    let nodes = summaries(conn, ids)?;
    let layers = found
        .into_iter()
        .filter_map(|((depth, v), (confidence, parent))| {
            let via = if parent == root.id {
                root.qualified_name.clone()
            } else {
                nodes.get(&parent)?.qualified_name.clone()
            };
            Some(TraceStep {
                depth,
                node: nodes.get(&v)?.clone(),
                confidence,
                via,
            })
        })
        .collect();
    Ok(CallPath {
        root,
        direction,
        max_depth,
        layers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactEntry {
    pub node: NodeSummary,
    pub distance: u32,
    /// Product of edge confidences along the best minimal-length path.
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub changed: Vec<NodeSummary>,
    /// Ordered by distance, then qualified name.
    pub affected: Vec<ImpactEntry>,
    pub warnings: Vec<String>,
}

const DEFINITION_LABELS: &str = "'Function', 'Method', 'Class', 'Interface', 'Enum', 'Type'";

/// Expands each input (a qualified name or an indexed file path) to the
/// symbols it denotes.
pub fn resolve_changed(conn: &Connection, changed: &[String]) -> Result<(Vec<NodeSummary>, Vec<String>)> {
    let by_file = format!(
        "SELECT {} FROM nodes WHERE file_path = ?1 AND label IN ({DEFINITION_LABELS}) ORDER BY id",
        NodeSummary::COLUMNS
    );
    let mut by_file = conn.prepare_cached(&by_file)?;
    let mut seen = HashSet::new();
    let mut symbols = Vec::new();
    let mut warnings = Vec::new();
    for item in changed {
        let mut hits = match find_symbol(conn, item)? {
            Some(n) => vec![n],
            None => by_file
                .query_map(params![item], NodeSummary::from_row)?
                .collect::<rusqlite::Result<Vec<_>>>()?,
        };
        if hits.is_empty() && !item.is_empty() {
            let file_exists: bool = conn.query_row(
                "SELECT EXISTS(SELECT 1 FROM nodes WHERE label = 'File' AND file_path = ?1)",
                params![item],
                |r| r.get(0),
            )?;
            if file_exists {
                continue;
            }
        }
        if hits.is_empty() {
            warnings.push(format!("unknown symbol or file {item:?}; skipped"));
        }
        hits.retain(|n| seen.insert(n.id));
        symbols.extend(hits);
    }
    Ok((symbols, warnings))
}

/// Callers (transitively, up to `depth` hops) of the changed symbols.
pub fn impact_analysis(conn: &Connection, changed: &[String], depth: u32) -> Result<ImpactReport> {
    if !(1..=MAX_TRACE_DEPTH).contains(&depth) {
        return Err(Error::validation(format!("depth must be between 1 and {MAX_TRACE_DEPTH}")));
    }
    let (sources, warnings) = resolve_changed(conn, changed)?;
    let mut next = Neighbours::new(conn, TraceDirection::Inbound)?;
    let mut visited: HashSet<i64> = sources.iter().map(|n| n.id).collect();
    let mut frontier: BTreeMap<i64, f64> = sources.iter().map(|n| (n.id, 1.0)).collect();
    let mut found: Vec<(u32, i64, f64)> = Vec::new();
    for d in 1..=depth {
        let mut layer: BTreeMap<i64, f64> = BTreeMap::new();
        for (&u, &path_conf) in &frontier {
            for (v, conf) in next.of(u)? {
                if visited.contains(&v) {
                    continue;
                }
                let c = path_conf * conf;
                let slot = layer.entry(v).or_insert(c);
                if c > *slot {
                    *slot = c;
                }
            }
        }
        if layer.is_empty() {
            break;
        }
        for (&v, &c) in &layer {
            visited.insert(v);
            found.push((d, v, c));
        }
        frontier = layer;
    }
    let nodes = summaries(conn, found.iter().map(|(_, v, _)| *v))?;
    let mut affected: Vec<ImpactEntry> = found
        .into_iter()
        .filter_map(|(distance, v, confidence)| {
            Some(ImpactEntry {
                node: nodes.get(&v)?.clone(),
                distance,
                confidence,
            })
        })
        .collect();
    affected.sort_by(|a, b| {
        a.distance
            .cmp(&b.distance)
            .then_with(|| a.node.qualified_name.cmp(&b.node.qualified_name))
            .then_with(|| a.node.id.cmp(&b.node.id))
    });
    Ok(ImpactReport {
        changed: sources,
        affected,
        warnings,
    })
}
