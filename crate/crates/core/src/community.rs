//! Single-level Louvain community detection over the call graph, followed
//! by a density-based refinement pass.
//!
//! Nodes are keyed by qualified name and swept in qualified-name order, so
//! the partition depends only on the graph's content and not on persisted
//! row ids.

use std::collections::{BTreeMap, HashMap};

use rusqlite::Connection;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{EdgeType, GraphBuffer, GraphNode, NodeLabel, Properties};

pub const DEFAULT_GAMMA: f64 = 1.0;
pub const MAX_SWEEPS: usize = 20;
/// Communities sparser than this are split by the refinement pass.
pub const DENSITY_THRESHOLD: f64 = 0.01;
const GAIN_EPS: f64 = 1e-12;

/// Weighted undirected graph. Parallel directed edges between a pair are
/// summed; self-loops are dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CallGraph {
    /// Sorted ascending; the index is the node's position everywhere else.
    pub names: Vec<String>,
    pub adj: Vec<Vec<(usize, f64)>>,
    pub degree: Vec<f64>,
    /// Total edge weight `m`.
    pub total_weight: f64,
}

impl CallGraph {
    pub fn from_edges<I, S>(edges: I) -> CallGraph
    where
        I: IntoIterator<Item = (S, S, f64)>,
        S: AsRef<str>,
    {
        let edges: Vec<(S, S, f64)> = edges.into_iter().filter(|(a, b, _)| a.as_ref() != b.as_ref()).collect();
        let mut names: Vec<&str> = edges.iter().flat_map(|(a, b, _)| [a.as_ref(), b.as_ref()]).collect();
        names.sort_unstable();
        names.dedup();
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let mut pairs: Vec<(usize, usize, f64)> = edges
            .iter()
            .map(|(a, b, w)| {
                let (i, j) = (index[a.as_ref()], index[b.as_ref()]);
                (i.min(j), i.max(j), *w)
            })
            .collect();
        // Stable, so parallel weights are summed in input order.
        pairs.sort_by_key(|&(i, j, _)| (i, j));
        let mut adj = vec![Vec::new(); names.len()];
        let mut degree = vec![0.0; names.len()];
        let mut total_weight = 0.0;
        let mut k = 0;
        while k < pairs.len() {
            let (i, j, mut w) = pairs[k];
            k += 1;
            while k < pairs.len() && (pairs[k].0, pairs[k].1) == (i, j) {
                w += pairs[k].2;
                k += 1;
            }
            adj[i].push((j, w));
            adj[j].push((i, w));
            degree[i] += w;
            degree[j] += w;
            total_weight += w;
        }
        for list in &mut adj {
            list.sort_by_key(|(j, _)| *j);
        }
        CallGraph {
            names: names.into_iter().map(str::to_string).collect(),
            adj,
            degree,
            total_weight,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adj[i]
            .binary_search_by_key(&j, |(k, _)| *k)
            .map(|p| self.adj[i][p].1)
            .unwrap_or(0.0)
    }
}

/// Call graph of a persisted index.
pub fn build_call_graph(conn: &Connection) -> Result<CallGraph> {
    let sql = format!(
        "SELECT a.qualified_name, b.qualified_name, COUNT(*) FROM edges e
         JOIN nodes a ON a.id = e.src JOIN nodes b ON b.id = e.dst
         WHERE e.type IN ({}) GROUP BY e.src, e.dst",
        crate::query::call_type_list()
    );
    let mut stmt = conn.prepare(&sql)?;
    let rows = stmt
        .query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, i64>(2)? as f64)))?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    Ok(CallGraph::from_edges(rows))
}

/// Call graph of an in-memory buffer. Buffer edges are already unique per
/// (src, dst, type), so each contributes weight 1.
pub fn build_call_graph_from_buffer(buffer: &GraphBuffer) -> CallGraph {
    CallGraph::from_edges(buffer.edges().iter().filter(|e| e.edge_type.is_call()).map(|e| {
        (
            buffer.node(e.src).qualified_name.as_str(),
            buffer.node(e.dst).qualified_name.as_str(),
            1.0,
        )
    }))
}

/// Gain from inserting an isolated node into a community:
/// `w_in - gamma * k_i * sigma_tot / (2m)`, where `w_in` is the weight
/// between the node and the community. The change in global modularity is
/// this value divided by `m`. Zero on an empty graph.
pub fn modularity_gain(w_in: f64, k_i: f64, sigma_tot: f64, m: f64, gamma: f64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    w_in - gamma * k_i * sigma_tot / (2.0 * m)
}

/// Global modularity of an assignment (`community[i]` for node `i`).
pub fn modularity(g: &CallGraph, community: &[usize], gamma: f64) -> f64 {
    let m = g.total_weight;
    if m == 0.0 {
        return 0.0;
    }
    let mut internal: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total: BTreeMap<usize, f64> = BTreeMap::new();
    for i in 0..g.len() {
        *total.entry(community[i]).or_default() += g.degree[i];
        for &(j, w) in &g.adj[i] {
            if i < j && community[i] == community[j] {
                *internal.entry(community[i]).or_default() += w;
            }
        }
    }
    total
        .iter()
        .map(|(c, tot)| internal.get(c).copied().unwrap_or(0.0) / m - gamma * (tot / (2.0 * m)).powi(2))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub node: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Community index per node, renumbered `0..k` in order of each
    /// community's first member.
    pub community: Vec<usize>,
    pub modularity: f64,
    pub sweeps: usize,
    /// Moves accepted during local moving, in order.
    pub moves: Vec<Move>,
    /// Nodes ejected by refinement.
    pub ejected: usize,
}

impl Partition {
    pub fn count(&self) -> usize {
        self.community.iter().copied().max().map_or(0, |c| c + 1)
    }

    /// Member indices per community.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count()];
        for (i, &c) in self.community.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

fn renumber(community: &mut [usize]) {
    let mut map = BTreeMap::new();
    for c in community.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
}

/// Local moving phase: sweeps nodes in index order, moving each to the
/// neighbouring community with the largest positive gain, until a sweep
/// makes no move or `MAX_SWEEPS` is reached.
pub fn local_moving(g: &CallGraph, gamma: f64) -> Partition {
    let n = g.len();
    let m = g.total_weight;
    let mut community: Vec<usize> = (0..n).collect();
    let mut sigma: Vec<f64> = g.degree.clone();
    let mut moves = Vec::new();
    let mut sweeps = 0;
    let mut links: BTreeMap<usize, f64> = BTreeMap::new();
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut moved = false;
        for i in 0..n {
            let k_i = g.degree[i];
            let current = community[i];
            links.clear();
            for &(j, w) in &g.adj[i] {
                *links.entry(community[j]).or_default() += w;
            }
            sigma[current] -= k_i;
            let stay = modularity_gain(links.get(&current).copied().unwrap_or(0.0), k_i, sigma[current], m, gamma);
            let mut best = (current, stay);
            for (&c, &w_in) in &links {
                if c == current {
                    continue;
                }
                let gain = modularity_gain(w_in, k_i, sigma[c], m, gamma);
                if gain > best.1 + GAIN_EPS {
                    best = (c, gain);
                }
            }
            sigma[best.0] += k_i;
            if best.0 != current {
                community[i] = best.0;
                moves.push(Move {
                    node: i,
                    from: current,
                    to: best.0,
                });
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    let modularity = modularity(g, &community, gamma);
    renumber(&mut community);
    Partition {
        community,
        modularity,
        sweeps,
        moves,
        ejected: 0,
    }
}

/// Internal edge weight over the unweighted pair count; `None` below two
/// members.
pub fn internal_density(g: &CallGraph, members: &[usize], community: &[usize]) -> Option<f64> {
    let n = members.len();
    if n < 2 {
        return None;
    }
    let c = community[members[0]];
    let internal: f64 = members
        .iter()
        .flat_map(|&i| g.adj[i].iter().filter(move |(j, _)| i < *j && community[*j] == c).map(|(_, w)| *w))
        .sum();
    Some(internal / (n as f64 * (n as f64 - 1.0) / 2.0))
}

/// Splits communities sparser than [`DENSITY_THRESHOLD`]: members whose
/// weight to the rest of the community is below the community mean become
/// singletons.
pub fn refine_partition(g: &CallGraph, mut p: Partition, gamma: f64) -> Partition {
    let mut next = p.count();
    let mut ejected = 0;
    for members in p.groups() {
        let Some(density) = internal_density(g, &members, &p.community) else {
            continue;
        };
        if density >= DENSITY_THRESHOLD {
            continue;
        }
        let c = p.community[members[0]];
        let attach: Vec<f64> = members
            .iter()
            .map(|&i| g.adj[i].iter().filter(|(j, _)| p.community[*j] == c).map(|(_, w)| w).sum())
            .collect();
        let mean = attach.iter().sum::<f64>() / members.len() as f64;
        for (&i, &a) in members.iter().zip(&attach) {
            if a < mean {
                p.community[i] = next;
                next += 1;
                ejected += 1;
            }
        }
    }
    renumber(&mut p.community);
    p.modularity = modularity(g, &p.community, gamma);
    p.ejected = ejected;
    p
}

pub fn louvain_partition(g: &CallGraph, gamma: f64) -> Partition {
    refine_partition(g, local_moving(g, gamma), gamma)
}

/// Adds one Community node per group (named after its smallest member)
/// and a MEMBER_OF edge from every member. Returns the number of
/// communities added.
pub fn materialize(buffer: &mut GraphBuffer, g: &CallGraph, p: &Partition) -> Result<usize> {
    let mut added = 0;
    for members in p.groups() {
        let Some(&first) = members.first() else { continue };
        let qname = format!("community:{}", g.names[first]);
        let mut props = Properties::new();
        props.insert("size".into(), members.len().to_string());
        let mut node = GraphNode::new(NodeLabel::Community, &qname).with_simple_name(&qname);
        node.properties = props;
        let cid = buffer.add_node(node)?;
        for &i in &members {
            if let Some(member) = buffer.lookup(&g.names[i]) {
                buffer.add_edge(member, cid, EdgeType::MemberOf, 1.0)?;
            }
        }
        added += 1;
    }
    Ok(added)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph(edges: &[(usize, usize)]) -> CallGraph {
        CallGraph::from_edges(edges.iter().map(|(a, b)| (format!("n{a:02}"), format!("n{b:02}"), 1.0)))
    }

    /// Every set partition of `0..n`, as restricted-growth strings.
    fn all_partitions(n: usize) -> Vec<Vec<usize>> {
        fn rec(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
            if i == n {
                out.push(cur.clone());
                return;
            }
            for c in 0..=max + 1 {
                cur.push(c);
                rec(i + 1, n, cur, max.max(c), out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        if n > 0 {
            rec(1, n, &mut vec![0], 0, &mut out);
        }
        out
    }

    fn best_partition(g: &CallGraph) -> Vec<usize> {
        all_partitions(g.len())
            .into_iter()
            .max_by(|a, b| modularity(g, a, 1.0).total_cmp(&modularity(g, b, 1.0)))
            .unwrap()
    }

    #[test]
    fn weights_collapse_direction() {
        let g = CallGraph::from_edges([("a", "b", 1.0), ("a", "b", 1.0), ("b", "a", 1.0), ("c", "c", 1.0)]);
        assert_eq!(g.names, vec!["a", "b"]);
        assert_eq!(g.weight(0, 1), 3.0);
        assert_eq!(g.total_weight, 3.0);
        assert!(CallGraph::from_edges(Vec::<(String, String, f64)>::new()).is_empty());
    }

    #[test]
    fn gain_formula() {
        assert_eq!(modularity_gain(0.0, 3.0, 0.0, 10.0, 1.0), 0.0);
        assert!((modularity_gain(1.0, 2.0, 4.0, 10.0, 1.0) - 0.6).abs() < 1e-12);
        assert_eq!(modularity_gain(1.0, 2.0, 4.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn two_triangles_match_brute_force() {
        let g = graph(&[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]);
        let p = louvain_partition(&g, 1.0);
        assert_eq!(p.community, vec![0, 0, 0, 1, 1, 1]);
        let best = best_partition(&g);
        assert!((p.modularity - modularity(&g, &best, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn k4_is_one_community() {
        let g = graph(&[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let p = louvain_partition(&g, 1.0);
        assert_eq!(p.count(), 1);
        assert_eq!(best_partition(&g).iter().max(), Some(&0));
    }

    #[test]
    fn empty_graph() {
        let p = louvain_partition(&CallGraph::default(), 1.0);
        assert!(p.community.is_empty());
        assert_eq!(p.modularity, 0.0);
    }

    #[test]
    fn refinement_keeps_dense_and_singletons() {
        let g = graph(&[(0, 1), (1, 2), (2, 0)]);
        let p = Partition {
            community: vec![0, 0, 0],
            ..Default::default()
        };
        assert_eq!(refine_partition(&g, p, 1.0).community, vec![0, 0, 0]);
        let g = graph(&[(0, 1)]);
        let p = Partition {
            community: vec![0, 1],
            ..Default::default()
        };
        assert_eq!(refine_partition(&g, p, 1.0).ejected, 0);
    }

    #[test]
    fn sparse_star_ejects_leaves() {
        let edges: Vec<(usize, usize)> = (1..=300).map(|i| (0, i)).collect();
        let g = CallGraph::from_edges(edges.iter().map(|(a, b)| (format!("n{a:03}"), format!("n{b:03}"), 1.0)));
        let members: Vec<usize> = (0..301).collect();
        let all_in_one = vec![0; 301];
        let density = internal_density(&g, &members, &all_in_one).unwrap();
        assert!((density - 300.0 / (301.0 * 300.0 / 2.0)).abs() < 1e-15);
        assert!(density < DENSITY_THRESHOLD);
        let p = refine_partition(
            &g,
            Partition {
                community: all_in_one,
                ..Default::default()
            },
            1.0,
        );
        assert_eq!(p.ejected, 300);
        assert_eq!(p.count(), 301);
    }

    #[test]
    fn materialize_adds_communities() {
        let mut b = GraphBuffer::new();
        let ids: Vec<_> = (0..6)
            .map(|i| b.add(NodeLabel::Function, &format!("n{i:02}"), Properties::new()).unwrap())
            .collect();
        for (x, y) in [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)] {
            b.add_edge(ids[x], ids[y], EdgeType::Calls, 0.9).unwrap();
        }
        let g = build_call_graph_from_buffer(&b);
        let p = louvain_partition(&g, 1.0);
        assert_eq!(materialize(&mut b, &g, &p).unwrap(), 2);
        assert!(b.lookup("community:n00").is_some());
        assert!(b.lookup("community:n03").is_some());
        assert_eq!(b.edges().iter().filter(|e| e.edge_type == EdgeType::MemberOf).count(), 6);
    }

    fn small_graph() -> impl proptest::strategy::Strategy<Value = CallGraph> {
        (2usize..=12).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n, 1u8..4), 1..30).prop_map(|es| {
                CallGraph::from_edges(es.into_iter().map(|(a, b, w)| (format!("n{a:02}"), format!("n{b:02}"), w as f64)))
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn gain_matches_global_recomputation(g in small_graph(), seed in any::<u64>()) {
            prop_assume!(!g.is_empty() && g.total_weight > 0.0);
            let n = g.len();
            let community: Vec<usize> = (0..n).map(|i| ((seed >> (i % 60)) as usize + i) % 3).collect();
            let m = g.total_weight;
            for i in 0..n {
                for target in 0..3 {
                    let from = community[i];
                    let w_to = |c: usize| g.adj[i].iter().filter(|(j, _)| community[*j] == c && *j != i).map(|(_, w)| w).sum::<f64>();
                    let sigma = |c: usize| (0..n).filter(|&j| j != i && community[j] == c).map(|j| g.degree[j]).sum::<f64>();
                    let k = g.degree[i];
                    let predicted = (modularity_gain(w_to(target), k, sigma(target), m, 1.0)
                        - modularity_gain(w_to(from), k, sigma(from), m, 1.0)) / m;
                    let mut after = community.clone();
                    after[i] = target;
                    let actual = modularity(&g, &after, 1.0) - modularity(&g, &community, 1.0);
                    prop_assert!((predicted - actual).abs() < 1e-9, "{predicted} vs {actual}");
                }
            }
        }

        #[test]
        fn local_moves_never_decrease_modularity(g in small_graph()) {
            let p = local_moving(&g, 1.0);
            let mut c: Vec<usize> = (0..g.len()).collect();
            let mut q = modularity(&g, &c, 1.0);
            for mv in &p.moves {
                prop_assert_eq!(c[mv.node], mv.from);
                c[mv.node] = mv.to;
                let next = modularity(&g, &c, 1.0);
                prop_assert!(next > q - 1e-12);
                q = next;
            }
            prop_assert!(p.sweeps <= MAX_SWEEPS);
        }

        #[test]
        fn partitions_are_valid_covers(g in small_graph()) {
            let p = louvain_partition(&g, 1.0);
            prop_assert_eq!(p.community.len(), g.len());
            let groups = p.groups();
            prop_assert!(groups.iter().all(|grp| !grp.is_empty()));
            prop_assert_eq!(groups.iter().map(Vec::len).sum::<usize>(), g.len());
            prop_assert!((p.modularity - modularity(&g, &p.community, 1.0)).abs() < 1e-12);
        }
    }
}
