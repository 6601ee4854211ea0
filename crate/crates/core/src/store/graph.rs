use std::collections::{BTreeMap, HashMap};

use rusqlite::{params, Connection, Row};
use serde::{Deserialize, Serialize};

use super::schema;
use crate::error::{Error, Result};
use crate::graph::{BufferEdge, EdgeType, GraphBuffer, GraphEdge, GraphNode, NodeKey, NodeLabel, Properties, Span};

fn props_json(p: &Properties) -> String {
    serde_json::to_string(p).unwrap_or_else(|_| "{}".to_string())
}

fn parse_props(text: &str) -> Properties {
    serde_json::from_str(text).unwrap_or_default()
}

pub(crate) fn row_to_node(row: &Row<'_>, offset: usize) -> rusqlite::Result<GraphNode> {
    let label: String = row.get(offset)?;
    let props: String = row.get(offset + 6)?;
    Ok(GraphNode {
        label: label.parse().unwrap_or(NodeLabel::Module),
        qualified_name: row.get(offset + 1)?,
        simple_name: row.get(offset + 2)?,
        file_path: row.get(offset + 3)?,
        span: Span::new(row.get(offset + 4)?, row.get(offset + 5)?),
        properties: parse_props(&props),
    })
}

pub(crate) const NODE_COLUMNS: &str = "label, qualified_name, simple_name, file_path, start_line, end_line, properties";

pub(crate) fn row_to_edge(row: &Row<'_>) -> rusqlite::Result<GraphEdge> {
    let ty: String = row.get(3)?;
    let props: String = row.get(5)?;
    Ok(GraphEdge {
        id: row.get(0)?,
        src: row.get(1)?,
        dst: row.get(2)?,
        edge_type: ty.parse().unwrap_or(EdgeType::Usage),
        confidence: row.get(4)?,
        properties: parse_props(&props),
    })
}

/// Inserts `nodes` and `edges` (endpoints are 1-based positions into
/// `nodes`) and returns the persisted node ids in input order. With
/// `defer_indexes` the secondary indexes are dropped first and rebuilt once
/// all rows are in. Must run inside a transaction.
pub fn bulk_insert(
    conn: &Connection,
    nodes: &[GraphNode],
    edges: &[BufferEdge],
    defer_indexes: bool,
) -> Result<Vec<i64>> {
    if defer_indexes {
        schema::drop_indexes(conn)?;
    } else {
        schema::create_indexes(conn)?;
    }
    let mut ids = Vec::with_capacity(nodes.len());
    {
        let mut stmt = conn.prepare_cached(
            "INSERT INTO nodes(label, qualified_name, simple_name, file_path, start_line, end_line, properties)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
        )?;
        for n in nodes {
            stmt.execute(params![
                n.label.as_str(),
                n.qualified_name,
                n.simple_name,
                n.file_path,
                n.span.start_line,
                n.span.end_line,
                props_json(&n.properties),
            ])?;
            ids.push(conn.last_insert_rowid());
        }
    }
    {
        let mut stmt = conn.prepare_cached(
            "INSERT INTO edges(src, dst, type, confidence, properties) VALUES (?1, ?2, ?3, ?4, ?5)",
        )?;
        for e in edges {
            let endpoint = |t: crate::graph::TempId| {
                ids.get((t.0 as usize).wrapping_sub(1))
                    .copied()
                    .ok_or(Error::DanglingEndpoint(t.0))
            };
            stmt.execute(params![
                endpoint(e.src)?,
                endpoint(e.dst)?,
                e.edge_type.as_str(),
                e.confidence,
                props_json(&e.properties),
            ])?;
        }
    }
    if defer_indexes {
        schema::create_indexes(conn)?;
    }
    Ok(ids)
}

/// Replaces the stored graph with `buffer`. Returns the temp-id → row-id
/// table (index `t - 1` holds the row id of temp id `t`). Must run inside
/// a transaction so a failure leaves the previous graph intact.
pub fn flush_buffer(conn: &Connection, buffer: &GraphBuffer) -> Result<Vec<i64>> {
    schema::drop_indexes(conn)?;
    conn.execute_batch("DELETE FROM edges; DELETE FROM nodes;")?;
    let nodes: Vec<GraphNode> = buffer.nodes().map(|(_, n)| n.clone()).collect();
    let ids = bulk_insert(conn, &nodes, buffer.edges(), true)?;
    super::bump_generation(conn)?;
    Ok(ids)
}

pub fn insert_node(conn: &Connection, n: &GraphNode) -> Result<i64> {
    conn.prepare_cached(
        "INSERT INTO nodes(label, qualified_name, simple_name, file_path, start_line, end_line, properties)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
    )?
    .execute(params![
        n.label.as_str(),
        n.qualified_name,
        n.simple_name,
        n.file_path,
        n.span.start_line,
        n.span.end_line,
        props_json(&n.properties),
    ])?;
    Ok(conn.last_insert_rowid())
}

pub fn update_node(conn: &Connection, id: i64, n: &GraphNode) -> Result<()> {
    conn.prepare_cached(
        "UPDATE nodes SET simple_name = ?2, file_path = ?3, start_line = ?4, end_line = ?5, properties = ?6
         WHERE id = ?1",
    )?
    .execute(params![
        id,
        n.simple_name,
        n.file_path,
        n.span.start_line,
        n.span.end_line,
        props_json(&n.properties),
    ])?;
    Ok(())
}

/// Deletes nodes and every edge touching them.
pub fn delete_nodes(conn: &Connection, ids: &[i64]) -> Result<()> {
    let mut del_edges = conn.prepare_cached("DELETE FROM edges WHERE src = ?1 OR dst = ?1")?;
    let mut del_node = conn.prepare_cached("DELETE FROM nodes WHERE id = ?1")?;
    for id in ids {
        del_edges.execute([id])?;
        del_node.execute([id])?;
    }
    Ok(())
}

pub fn insert_edge(
    conn: &Connection,
    src: i64,
    dst: i64,
    edge_type: EdgeType,
    confidence: f64,
    properties: &Properties,
) -> Result<i64> {
    conn.prepare_cached("INSERT INTO edges(src, dst, type, confidence, properties) VALUES (?1, ?2, ?3, ?4, ?5)")?
        .execute(params![src, dst, edge_type.as_str(), confidence, props_json(properties)])?;
    Ok(conn.last_insert_rowid())
}

pub fn update_edge(conn: &Connection, id: i64, confidence: f64, properties: &Properties) -> Result<()> {
    conn.prepare_cached("UPDATE edges SET confidence = ?2, properties = ?3 WHERE id = ?1")?
        .execute(params![id, confidence, props_json(properties)])?;
    Ok(())
}

pub fn delete_edges(conn: &Connection, ids: &[i64]) -> Result<()> {
    let mut stmt = conn.prepare_cached("DELETE FROM edges WHERE id = ?1")?;
    for id in ids {
        stmt.execute([id])?;
    }
    Ok(())
}

/// All nodes ordered by id.
pub fn load_nodes(conn: &Connection) -> Result<Vec<(i64, GraphNode)>> {
    let mut stmt = conn.prepare(&format!("SELECT id, {NODE_COLUMNS} FROM nodes ORDER BY id"))?;
    let rows = stmt.query_map([], |r| Ok((r.get(0)?, row_to_node(r, 1)?)))?;
    Ok(rows.collect::<rusqlite::Result<_>>()?)
}

/// All edges ordered by id.
pub fn load_edges(conn: &Connection) -> Result<Vec<GraphEdge>> {
    let mut stmt = conn.prepare("SELECT id, src, dst, type, confidence, properties FROM edges ORDER BY id")?;
    let rows = stmt.query_map([], row_to_edge)?;
    Ok(rows.collect::<rusqlite::Result<_>>()?)
}

pub fn node_id_map(conn: &Connection) -> Result<HashMap<NodeKey, i64>> {
    let mut stmt = conn.prepare("SELECT id, label, qualified_name FROM nodes")?;
    let rows = stmt.query_map([], |r| {
        let label: String = r.get(1)?;
        Ok((
            NodeKey {
                label: label.parse().unwrap_or(NodeLabel::Module),
                qualified_name: r.get(2)?,
            },
            r.get(0)?,
        ))
    })?;
    Ok(rows.collect::<rusqlite::Result<_>>()?)
}

pub type EdgeKey = (NodeKey, NodeKey, EdgeType);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalEdge {
    pub confidence: f64,
    pub properties: Properties,
}

/// A graph with persisted ids erased, for equality checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CanonicalGraph {
    pub nodes: BTreeMap<NodeKey, GraphNode>,
    pub edges: BTreeMap<EdgeKey, CanonicalEdge>,
}

impl CanonicalGraph {
    pub fn from_buffer(buffer: &GraphBuffer) -> Self {
        let mut g = CanonicalGraph::default();
        for (_, n) in buffer.nodes() {
            g.nodes.insert(n.key(), n.clone());
        }
        for e in buffer.edges() {
            g.edges.insert(
                (buffer.node(e.src).key(), buffer.node(e.dst).key(), e.edge_type),
                CanonicalEdge {
                    confidence: e.confidence,
                    properties: e.properties.clone(),
                },
            );
        }
        g
    }

    /// Human-readable summary of the first few differences.
    pub fn diff_summary(&self, other: &CanonicalGraph, limit: usize) -> Vec<String> {
        let mut out = Vec::new();
        for (k, n) in &self.nodes {
            match other.nodes.get(k) {
                None => out.push(format!("- node {:?} {}", k.label, k.qualified_name)),
                Some(m) if m != n => out.push(format!("~ node {:?} {}: {:?} vs {:?}", k.label, k.qualified_name, n, m)),
                _ => {}
            }
        }
        for k in other.nodes.keys().filter(|k| !self.nodes.contains_key(*k)) {
            out.push(format!("+ node {:?} {}", k.label, k.qualified_name));
        }
        for (k, e) in &self.edges {
            match other.edges.get(k) {
                None => out.push(format!("- edge {} -{}-> {}", k.0.qualified_name, k.2, k.1.qualified_name)),
                Some(f) if f != e => out.push(format!("~ edge {} -{}-> {}: {e:?} vs {f:?}", k.0.qualified_name, k.2, k.1.qualified_name)),
                _ => {}
            }
        }
        for k in other.edges.keys().filter(|k| !self.edges.contains_key(*k)) {
            out.push(format!("+ edge {} -{}-> {}", k.0.qualified_name, k.2, k.1.qualified_name));
        }
        out.truncate(limit);
        out
    }
}

pub fn canonical_graph(conn: &Connection) -> Result<CanonicalGraph> {
    let nodes = load_nodes(conn)?;
    let by_id: HashMap<i64, NodeKey> = nodes.iter().map(|(id, n)| (*id, n.key())).collect();
    let mut g = CanonicalGraph::default();
    for e in load_edges(conn)? {
        let (Some(s), Some(d)) = (by_id.get(&e.src), by_id.get(&e.dst)) else {
            return Err(Error::DanglingEndpoint(e.src.max(e.dst) as u64));
        };
        g.edges.insert(
            (s.clone(), d.clone(), e.edge_type),
            CanonicalEdge {
                confidence: e.confidence,
                properties: e.properties,
            },
        );
    }
    for (_, n) in nodes {
        g.nodes.insert(n.key(), n);
    }
    Ok(g)
}
