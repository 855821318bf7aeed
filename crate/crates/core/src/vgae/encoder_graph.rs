use crate::graph::{HetGraph, NodeId, NodeKind, RelationKind};
use crate::par::{for_each_row, Exec};
use ndarray::Array2;
use std::collections::BTreeSet;

/// Relations the encoder passes messages over, in weight order.
pub const ENCODER_RELATIONS: [RelationKind; 2] = [RelationKind::StreetToStreet, RelationKind::StreetToBridge];

#[derive(Debug, Clone)]
struct Csr {
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl Csr {
    fn build(n: usize, mut triples: Vec<(usize, usize, f64)>) -> Self {
        triples.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut offsets = vec![0; n + 1];
        for &(r, _, _) in &triples {
            offsets[r + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self { offsets, entries: triples.into_iter().map(|(_, c, w)| (c, w)).collect() }
    }

    fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Mean-normalized adjacency of one relation: `(A h)_i = sum_{j in N(i)} h_j / |N(i)|`.
#[derive(Debug, Clone)]
pub struct RelationAdjacency {
    forward: Csr,
    transpose: Csr,
}

impl RelationAdjacency {
    /// `pairs` are undirected; duplicates and self-pairs are dropped.
    pub fn from_undirected(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut neighbor_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(a, b) in pairs {
            if a != b {
                neighbor_sets[a].insert(b);
                neighbor_sets[b].insert(a);
            }
        }
        let mut fwd = Vec::new();
        let mut tr = Vec::new();
        for (i, set) in neighbor_sets.iter().enumerate() {
            let w = 1.0 / set.len().max(1) as f64;
            for &j in set {
                fwd.push((i, j, w));
                tr.push((j, i, w));
            }
        }
        Self { forward: Csr::build(n, fwd), transpose: Csr::build(n, tr) }
    }

    pub fn degree(&self, i: usize) -> usize {
        self.forward.row(i).len()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.forward.row(i).iter().map(|&(j, _)| j)
    }

    fn apply(csr: &Csr, h: &Array2<f64>, exec: Exec) -> Array2<f64> {
        let (n, d) = h.dim();
        let hs = h.as_slice().expect("standard layout");
        let mut out = Array2::zeros((n, d));
        for_each_row(exec, out.as_slice_mut().expect("standard layout"), d, |i, row| {
            for &(j, w) in csr.row(i) {
                let src = &hs[j * d..(j + 1) * d];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        });
        out
    }

    /// `A h`; rows without neighbors stay zero.
    pub fn aggregate(&self, h: &Array2<f64>, exec: Exec) -> Array2<f64> {
        Self::apply(&self.forward, h, exec)
    }

    /// `Aᵀ g`, the adjoint of [`Self::aggregate`].
    pub fn aggregate_transpose(&self, g: &Array2<f64>, exec: Exec) -> Array2<f64> {
        Self::apply(&self.transpose, g, exec)
    }
}

/// The street + bridge subgraph the encoder trains on, with local indices.
#[derive(Debug, Clone)]
pub struct EncoderGraph {
    /// Global node id for each local index.
    pub node_ids: Vec<NodeId>,
    /// Undirected local pairs per relation.
    pub relation_edges: Vec<Vec<(usize, usize)>>,
    pub relations: Vec<RelationAdjacency>,
}

impl EncoderGraph {
    pub fn new(node_ids: Vec<NodeId>, relation_edges: Vec<Vec<(usize, usize)>>) -> Self {
        let n = node_ids.len();
        let relations = relation_edges.iter().map(|p| RelationAdjacency::from_undirected(n, p)).collect();
        Self { node_ids, relation_edges, relations }
    }

    /// Fixture constructor with local ids `0..n`.
    pub fn from_edges(n: usize, relation_edges: Vec<Vec<(usize, usize)>>) -> Self {
        Self::new((0..n).collect(), relation_edges)
    }

    /// Street and bridge nodes of `graph` with the two encoder relations.
    pub fn from_het_graph(graph: &HetGraph) -> Self {
        let node_ids: Vec<NodeId> =
            graph.nodes().iter().filter(|n| n.kind != NodeKind::Building).map(|n| n.id).collect();
        let mut local = vec![usize::MAX; graph.node_count()];
        for (i, &id) in node_ids.iter().enumerate() {
            local[id] = i;
        }
        let relation_edges = ENCODER_RELATIONS
            .iter()
            .map(|&rel| graph.edges(rel).iter().map(|e| (local[e.src], local[e.dst])).collect())
            .collect();
        Self::new(node_ids, relation_edges)
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    /// Union of all relations as unique `(min, max)` pairs, sorted.
    pub fn positive_edges(&self) -> Vec<(usize, usize)> {
        let set: BTreeSet<(usize, usize)> = self
            .relation_edges
            .iter()
            .flatten()
            .filter(|(a, b)| a != b)
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        set.into_iter().collect()
    }

    /// Copy of this graph with the given undirected pairs removed from every relation.
    pub fn without_edges(&self, removed: &BTreeSet<(usize, usize)>) -> Self {
        let relation_edges = self
            .relation_edges
            .iter()
            .map(|edges| edges.iter().copied().filter(|&(a, b)| !removed.contains(&(a.min(b), a.max(b)))).collect())
            .collect();
        Self::new(self.node_ids.clone(), relation_edges)
    }
}
