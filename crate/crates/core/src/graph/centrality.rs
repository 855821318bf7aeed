//! Brandes betweenness over the undirected, unweighted street subgraph.

use super::{Adjacency, HetGraph, NodeKind, RelationKind};
use crate::par::{chunked_vector_sum, Exec};
use std::collections::VecDeque;

/// Sources accumulated per partial sum; fixed so results do not depend on thread count.
const SOURCE_CHUNK: usize = 64;

/// Normalized betweenness of every node (non-street nodes get 0).
///
/// Each connected component of size `c` is normalized by `(c-1)(c-2)/2`.
pub fn betweenness(graph: &HetGraph) -> Vec<f64> {
    betweenness_with(graph, Exec::default())
}

pub fn betweenness_with(graph: &HetGraph, exec: Exec) -> Vec<f64> {
    let streets = graph.ids_of(NodeKind::Street);
    let mut local = vec![usize::MAX; graph.node_count()];
    for (i, &id) in streets.iter().enumerate() {
        local[id] = i;
    }
    let pairs = graph
        .edges(RelationKind::StreetToStreet)
        .iter()
        .filter(|e| e.src != e.dst)
        .flat_map(|e| [(local[e.src], local[e.dst], 1.0), (local[e.dst], local[e.src], 1.0)]);
    let adj = Adjacency::from_pairs(streets.len(), pairs);
    let local_scores = brandes(&adj, exec);
    let mut out = vec![0.0; graph.node_count()];
    for (i, &id) in streets.iter().enumerate() {
        out[id] = local_scores[i];
    }
    out
}

/// Normalized betweenness for a plain undirected adjacency.
pub(crate) fn brandes(adj: &Adjacency, exec: Exec) -> Vec<f64> {
    let n = adj.len();
    let raw = chunked_vector_sum(exec, n, n, SOURCE_CHUNK, |s, acc| single_source(adj, s, acc));
    let comp = components(adj);
    let mut sizes = vec![0usize; n];
    for &c in &comp {
        sizes[c] += 1;
    }
    raw.iter()
        .zip(&comp)
        .map(|(&r, &c)| {
            let size = sizes[c] as f64;
            if size < 3.0 {
                0.0
            } else {
                // raw counts each unordered pair twice
                r / ((size - 1.0) * (size - 2.0))
            }
        })
        .collect()
}

fn single_source(adj: &Adjacency, s: usize, acc: &mut [f64]) {
    let n = adj.len();
    let mut stack = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i64; n];
    sigma[s] = 1.0;
    dist[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        stack.push(v);
        for &(w, _) in adj.neighbors(v) {
            if dist[w] < 0 {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }
    let mut delta = vec![0.0f64; n];
    while let Some(w) = stack.pop() {
        for &v in &preds[w] {
            delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
        }
        if w != s {
            acc[w] += delta[w];
        }
    }
}

fn components(adj: &Adjacency) -> Vec<usize> {
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &(w, _) in adj.neighbors(v) {
                if comp[w] == usize::MAX {
                    comp[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    comp
}
