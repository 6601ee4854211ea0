use std::collections::{BTreeMap, HashMap};

use rusqlite::Connection;
use serde::{Deserialize, Serialize};

use super::{call_type_list, NodeSummary};
use crate::error::Result;

/// Inbound edge types that count as a use for dead-code purposes.
const LIVE_EDGE_TYPES: &str = "'CALLS', 'HTTP_CALLS', 'ASYNC_CALLS', 'USAGE', 'HANDLES', 'TESTS', 'DECORATES'";

fn is_entry_point(n: &NodeSummary, props: &BTreeMap<String, String>) -> bool {
    let flag = |k: &str| props.get(k).is_some_and(|v| v == "true");
    let name = n.simple_name.as_str();
    flag("exported")
        || flag("is_test")
        || name == "main"
        || name == "init"
        || name.starts_with("init@")
        || (name.len() > 4 && name.starts_with("__") && name.ends_with("__"))
}

/// Functions and methods nothing refers to, minus exported symbols and
/// entry points (`main`, Go `init`, tests, dunder hooks).
pub fn detect_dead_code(conn: &Connection) -> Result<Vec<NodeSummary>> {
    let sql = format!(
        "SELECT {}, n.properties FROM nodes n
         WHERE n.label IN ('Function', 'Method')
           AND NOT EXISTS (SELECT 1 FROM edges e WHERE e.dst = n.id AND e.type IN ({LIVE_EDGE_TYPES}))
         ORDER BY n.id",
        NodeSummary::prefixed("n")
    );
    let mut stmt = conn.prepare(&sql)?;
    let mut rows = stmt.query([])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        let n = NodeSummary::from_row(row)?;
        let props: String = row.get(NodeSummary::WIDTH)?;
        let props: BTreeMap<String, String> = serde_json::from_str(&props).unwrap_or_default();
        if !is_entry_point(&n, &props) {
            out.push(n);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hub {
    pub node: NodeSummary,
    /// Number of call-family edges touching the node, either direction.
    pub degree: u64,
}

fn call_degrees(conn: &Connection) -> Result<HashMap<i64, u64>> {
    let sql = format!(
        "SELECT id, SUM(c) FROM (
            SELECT src AS id, COUNT(*) AS c FROM edges WHERE type IN ({0}) GROUP BY src
            UNION ALL
            SELECT dst AS id, COUNT(*) AS c FROM edges WHERE type IN ({0}) GROUP BY dst
         ) GROUP BY id",
        call_type_list()
    );
    let mut stmt = conn.prepare(&sql)?;
    let rows = stmt
        .query_map([], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, i64>(1)? as u64)))?
        .collect::<rusqlite::Result<HashMap<_, _>>>()?;
    Ok(rows)
}

fn rank(hubs: &mut [Hub]) {
    hubs.sort_by(|a, b| {
        b.degree
            .cmp(&a.degree)
            .then_with(|| a.node.qualified_name.cmp(&b.node.qualified_name))
            .then_with(|| a.node.id.cmp(&b.node.id))
    });
}

/// The `k` nodes with the highest call-graph degree.
pub fn top_hubs(conn: &Connection, k: usize) -> Result<Vec<Hub>> {
    let degrees = call_degrees(conn)?;
    let nodes = super::trace::summaries(conn, degrees.keys().copied())?;
    let mut hubs: Vec<Hub> = degrees
        .into_iter()
        .filter_map(|(id, degree)| Some(Hub { node: nodes.get(&id)?.clone(), degree }))
        .collect();
    rank(&mut hubs);
    hubs.truncate(k);
    Ok(hubs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunitySummary {
    pub qualified_name: String,
    pub size: usize,
    pub hubs: Vec<Hub>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityLink {
    pub from: String,
    pub to: String,
    /// Call-family edges between the two communities, both directions.
    pub weight: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSummary {
    /// Largest first, ties by name.
    pub communities: Vec<CommunitySummary>,
    pub links: Vec<CommunityLink>,
}

pub const DEFAULT_HUBS: usize = 5;

pub fn architecture_summary(conn: &Connection, k: usize) -> Result<ArchitectureSummary> {
    let mut stmt = conn.prepare(
        "SELECT e.src, c.qualified_name FROM edges e JOIN nodes c ON c.id = e.dst
         WHERE e.type = 'MEMBER_OF' AND c.label = 'Community'",
    )?;
    let membership: HashMap<i64, String> = stmt
        .query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?
        .collect::<rusqlite::Result<_>>()?;
    if membership.is_empty() {
        return Ok(ArchitectureSummary::default());
    }
    let degrees = call_degrees(conn)?;
    let nodes = super::trace::summaries(conn, membership.keys().copied())?;
    let mut groups: BTreeMap<&str, Vec<Hub>> = BTreeMap::new();
    for (id, community) in &membership {
        if let Some(n) = nodes.get(id) {
            groups.entry(community.as_str()).or_default().push(Hub {
                node: n.clone(),
                degree: degrees.get(id).copied().unwrap_or(0),
            });
        }
    }
    let mut communities: Vec<CommunitySummary> = groups
        .into_iter()
        .map(|(name, mut members)| {
            rank(&mut members);
            let size = members.len();
            members.truncate(k);
            CommunitySummary {
                qualified_name: name.to_string(),
                size,
                hubs: members,
            }
        })
        .collect();
    communities.sort_by(|a, b| b.size.cmp(&a.size).then_with(|| a.qualified_name.cmp(&b.qualified_name)));

    let sql = format!("SELECT src, dst FROM edges WHERE type IN ({})", call_type_list());
    let mut stmt = conn.prepare(&sql)?;
    let mut weights: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut rows = stmt.query([])?;
    while let Some(row) = rows.next()? {
        let (s, d): (i64, i64) = (row.get(0)?, row.get(1)?);
        if let (Some(a), Some(b)) = (membership.get(&s), membership.get(&d)) {
            if a != b {
                let key = if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
                *weights.entry(key).or_default() += 1;
            }
        }
    }
    let mut links: Vec<CommunityLink> = weights
        .into_iter()
        .map(|((from, to), weight)| CommunityLink { from, to, weight })
        .collect();
    links.sort_by(|a, b| b.weight.cmp(&a.weight).then_with(|| (&a.from, &a.to).cmp(&(&b.from, &b.to))));
    Ok(ArchitectureSummary { communities, links })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaEntry {
    pub name: String,
    pub count: u64,
    pub properties: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSchema {
    pub node_labels: Vec<SchemaEntry>,
    pub edge_types: Vec<SchemaEntry>,
}

fn schema_entries(conn: &Connection, table: &str, column: &str) -> Result<Vec<SchemaEntry>> {
    let mut stmt = conn.prepare(&format!(
        "SELECT {column}, COUNT(*) FROM {table} GROUP BY {column} ORDER BY {column}"
    ))?;
    let counts: Vec<(String, i64)> = stmt
        .query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?
        .collect::<rusqlite::Result<_>>()?;
    let mut stmt = conn.prepare(&format!(
        "SELECT DISTINCT t.{column}, j.key FROM {table} t, json_each(t.properties) j ORDER BY 1, 2"
    ))?;
    let mut keys: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for row in stmt.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))? {
        let (k, p) = row?;
        keys.entry(k).or_default().push(p);
    }
    Ok(counts
        .into_iter()
        .map(|(name, count)| SchemaEntry {
            properties: keys.remove(&name).unwrap_or_default(),
            name,
            count: count as u64,
        })
        .collect())
}

/// Labels and edge types present in the store, with counts and the
/// property keys seen on each.
pub fn graph_schema(conn: &Connection) -> Result<GraphSchema> {
    Ok(GraphSchema {
        node_labels: schema_entries(conn, "nodes", "label")?,
        edge_types: schema_entries(conn, "edges", "type")?,
    })
}
