//! Network-distance measures to trunk (national highway) street nodes.

use super::{HetGraph, NodeId, NodeKind, RelationKind};
use crate::par::{map_slice, Exec};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Network radius for counting trunk nodes around a bridge.
pub const HIGHWAY_RADIUS_M: f64 = 2_000.0;
/// Value used for nodes with no trunk node reachable.
pub const NEAREST_HIGHWAY_CAP_M: f64 = 20_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
struct State {
    dist: f64,
    node: NodeId,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over street edges (metres) from `sources`, settling nodes up to `limit`.
/// Returns settled `(node, distance)` pairs in settle order.
fn dijkstra(adj: &super::Adjacency, sources: &[NodeId], limit: f64) -> Vec<(NodeId, f64)> {
    let mut best: std::collections::HashMap<NodeId, f64> = std::collections::HashMap::new();
    let mut heap = BinaryHeap::new();
    for &s in sources {
        best.insert(s, 0.0);
        heap.push(State { dist: 0.0, node: s });
    }
    let mut settled = Vec::new();
    let mut done = std::collections::HashSet::new();
    while let Some(State { dist, node }) = heap.pop() {
        if !done.insert(node) {
            continue;
        }
        settled.push((node, dist));
        for &(w, len) in adj.neighbors(node) {
            let nd = dist + len;
            if nd <= limit && best.get(&w).is_none_or(|&d| nd < d) {
                best.insert(w, nd);
                heap.push(State { dist: nd, node: w });
            }
        }
    }
    settled
}

/// Trunk street nodes within [`HIGHWAY_RADIUS_M`] network distance of the
/// bridge's snapped street node (the snapped node itself included).
pub fn highway_metapath_count(graph: &HetGraph, bridge: NodeId) -> usize {
    let adj = graph.adjacency(RelationKind::StreetToStreet);
    count_for(graph, &adj, &graph.snapped_street(), bridge)
}

fn count_for(graph: &HetGraph, adj: &super::Adjacency, snapped: &[Option<(NodeId, f64)>], bridge: NodeId) -> usize {
    let Some((street, _)) = snapped[bridge] else { return 0 };
    dijkstra(adj, &[street], HIGHWAY_RADIUS_M).into_iter().filter(|&(v, _)| graph.node(v).is_highway).count()
}

/// Computes the highway count of every bridge and stores it on the node
/// together with `is_highway = count > 0`.
pub fn highway_counts(graph: &mut HetGraph, exec: Exec) {
    let adj = graph.adjacency(RelationKind::StreetToStreet);
    let snapped = graph.snapped_street();
    let bridges = graph.bridges();
    let counts = map_slice(exec, &bridges, |&b| count_for(graph, &adj, &snapped, b));
    let nodes = graph.nodes_mut();
    for (b, c) in bridges.into_iter().zip(counts) {
        nodes[b].highway_count = c;
        nodes[b].is_highway = c > 0;
    }
}

/// Network distance from every street node to the nearest trunk street node,
/// capped at [`NEAREST_HIGHWAY_CAP_M`]. Non-street entries are the cap.
pub fn nearest_highway_distances(graph: &HetGraph) -> Vec<f64> {
    let adj = graph.adjacency(RelationKind::StreetToStreet);
    let trunk: Vec<NodeId> =
        graph.nodes().iter().filter(|n| n.kind == NodeKind::Street && n.is_highway).map(|n| n.id).collect();
    let mut out = vec![NEAREST_HIGHWAY_CAP_M; graph.node_count()];
    for (v, d) in dijkstra(&adj, &trunk, NEAREST_HIGHWAY_CAP_M) {
        out[v] = d;
    }
    out
}
