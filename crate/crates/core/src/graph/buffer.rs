use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::model::{EdgeType, GraphNode, NodeLabel, Properties};
use crate::error::{Error, Result};

/// Buffer-local node id. Starts at 1 and only means something inside the
/// buffer that issued it; persisted ids are plain `i64` row ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TempId(pub u64);

impl fmt::Display for TempId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferEdge {
    pub src: TempId,
    pub dst: TempId,
    pub edge_type: EdgeType,
    pub confidence: f64,
    pub properties: Properties,
}

/// In-memory staging graph used by the pipeline phases before flush.
///
/// Nodes are unique by qualified name; edges are unique by
/// `(src, dst, type)`. Single owner, no interior mutability.
#[derive(Debug, Clone, Default)]
pub struct GraphBuffer {
    nodes: Vec<GraphNode>,
    by_qname: HashMap<String, TempId>,
    by_label: BTreeMap<NodeLabel, Vec<TempId>>,
    edges: Vec<BufferEdge>,
    edge_index: HashMap<(TempId, TempId, EdgeType), usize>,
}

impl GraphBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    /// Inserts a node, or returns the id of the existing node with the same
    /// qualified name. Re-adding under a different label is a conflict.
    pub fn add_node(&mut self, node: GraphNode) -> Result<TempId> {
        if node.qualified_name.is_empty() {
            return Err(Error::validation("qualified_name must not be empty"));
        }
        if let Some(&id) = self.by_qname.get(&node.qualified_name) {
            let existing = self.node(id).label;
            if existing != node.label {
                return Err(Error::LabelConflict {
                    qualified_name: node.qualified_name,
                    existing,
                    incoming: node.label,
                });
            }
            return Ok(id);
        }
        let id = TempId(self.nodes.len() as u64 + 1);
        self.by_qname.insert(node.qualified_name.clone(), id);
        self.by_label.entry(node.label).or_default().push(id);
        self.nodes.push(node);
        Ok(id)
    }

    /// Convenience wrapper over [`GraphBuffer::add_node`].
    pub fn add(
        &mut self,
        label: NodeLabel,
        qualified_name: &str,
        properties: Properties,
    ) -> Result<TempId> {
        let mut node = GraphNode::new(label, qualified_name);
        node.properties = properties;
        self.add_node(node)
    }

    /// Records an edge. Duplicate `(src, dst, type)` triples collapse into one
    /// edge holding the maximum confidence; properties are unioned with the
    /// higher-confidence side winning on key clashes.
    pub fn add_edge(
        &mut self,
        src: TempId,
        dst: TempId,
        edge_type: EdgeType,
        confidence: f64,
    ) -> Result<usize> {
        self.add_edge_with(src, dst, edge_type, confidence, Properties::new())
    }

    pub fn add_edge_with(
        &mut self,
        src: TempId,
        dst: TempId,
        edge_type: EdgeType,
        confidence: f64,
        properties: Properties,
    ) -> Result<usize> {
        for end in [src, dst] {
            if !self.contains_id(end) {
                return Err(Error::DanglingEndpoint(end.0));
            }
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::validation(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        if edge_type.is_structural() && confidence != 1.0 {
            return Err(Error::validation(format!(
                "{edge_type} edges must carry confidence 1.0"
            )));
        }
        if edge_type == EdgeType::MemberOf
            && (self.node(src).label == NodeLabel::Community
                || self.node(dst).label != NodeLabel::Community)
        {
            return Err(Error::validation(
                "MEMBER_OF must point from a non-Community node to a Community node",
            ));
        }

        let key = (src, dst, edge_type);
        if let Some(&idx) = self.edge_index.get(&key) {
            let edge = &mut self.edges[idx];
            if confidence > edge.confidence {
                edge.confidence = confidence;
                edge.properties.extend(properties);
            } else {
                for (k, v) in properties {
                    edge.properties.entry(k).or_insert(v);
                }
            }
            return Ok(idx);
        }
        let idx = self.edges.len();
        self.edges.push(BufferEdge {
            src,
            dst,
            edge_type,
            confidence,
            properties,
        });
        self.edge_index.insert(key, idx);
        Ok(idx)
    }

    fn contains_id(&self, id: TempId) -> bool {
        id.0 >= 1 && id.0 as usize <= self.nodes.len()
    }

    pub fn node(&self, id: TempId) -> &GraphNode {
        &self.nodes[id.0 as usize - 1]
    }

    pub fn get(&self, id: TempId) -> Option<&GraphNode> {
        self.contains_id(id).then(|| self.node(id))
    }

    pub fn node_mut(&mut self, id: TempId) -> &mut GraphNode {
        &mut self.nodes[id.0 as usize - 1]
    }

    pub fn lookup(&self, qualified_name: &str) -> Option<TempId> {
        self.by_qname.get(qualified_name).copied()
    }

    pub fn with_label(&self, label: NodeLabel) -> &[TempId] {
        self.by_label.get(&label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn label_counts(&self) -> BTreeMap<NodeLabel, usize> {
        self.by_label.iter().map(|(l, ids)| (*l, ids.len())).collect()
    }

    /// Nodes in temp-id order.
    pub fn nodes(&self) -> impl Iterator<Item = (TempId, &GraphNode)> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (TempId(i as u64 + 1), n))
    }

    pub fn edges(&self) -> &[BufferEdge] {
        &self.edges
    }

    pub fn find_edge(&self, src: TempId, dst: TempId, edge_type: EdgeType) -> Option<&BufferEdge> {
        self.edge_index
            .get(&(src, dst, edge_type))
            .map(|&i| &self.edges[i])
    }

    /// Copies `node` (and nothing else) from another buffer, returning its id
    /// here. Used by workers that need edge endpoints owned by a shared base.
    pub fn adopt(&mut self, node: &GraphNode) -> Result<TempId> {
        match self.lookup(&node.qualified_name) {
            Some(id) => {
                let existing = self.node(id).label;
                if existing != node.label {
                    return Err(Error::LabelConflict {
                        qualified_name: node.qualified_name.clone(),
                        existing,
                        incoming: node.label,
                    });
                }
                Ok(id)
            }
            None => self.add_node(node.clone()),
        }
    }
}

/// Merges per-worker buffers in the given (worker index) order.
///
/// Nodes are unioned by qualified name, the first buffer's copy winning;
/// edges are re-mapped into the merged id space and deduplicated.
pub fn buffer_merge(workers: Vec<GraphBuffer>) -> Result<GraphBuffer> {
    let mut iter = workers.into_iter();
    let Some(mut merged) = iter.next() else {
        return Ok(GraphBuffer::new());
    };
    for worker in iter {
        let mut remap = Vec::with_capacity(worker.nodes.len());
        for node in worker.nodes {
            remap.push(merged.adopt_owned(node)?);
        }
        for edge in worker.edges {
            let src = remap[edge.src.0 as usize - 1];
            let dst = remap[edge.dst.0 as usize - 1];
            merged.add_edge_with(src, dst, edge.edge_type, edge.confidence, edge.properties)?;
        }
    }
    Ok(merged)
}

impl GraphBuffer {
    fn adopt_owned(&mut self, node: GraphNode) -> Result<TempId> {
        if let Some(id) = self.lookup(&node.qualified_name) {
            let existing = self.node(id).label;
            if existing != node.label {
                return Err(Error::LabelConflict {
                    qualified_name: node.qualified_name,
                    existing,
                    incoming: node.label,
                });
            }
            return Ok(id);
        }
        self.add_node(node)
    }
}
