//! Heterogeneous street/bridge/building graph.
//!
//! Node ids are dense and stable: street nodes first (in order of first
//! appearance in the street input), then bridges (input order), then
//! buildings (input order). Every tie-break in this module picks the lowest id.

mod centrality;
mod edges;
mod features;
mod highway;
pub mod ingest;
mod spatial;

pub use centrality::{betweenness, betweenness_with};
pub use edges::{compute_knn_edges, knn_building_edges, snap_bridges, KnnParams};
pub use features::{build_features, build_features_with, NodeFeatures, FEATURE_DIM};
pub use highway::{
    highway_counts, highway_metapath_count, nearest_highway_distances, HIGHWAY_RADIUS_M, NEAREST_HIGHWAY_CAP_M,
};
pub use ingest::{
    ingest_bridges, ingest_buildings, ingest_streets, BridgeRecord, BuildingRecord, IngestReport, PropertyKeys,
    StreetNetwork,
};
pub use spatial::SpatialGrid;

use crate::geo::{GeoError, GeoPoint, PlanePoint};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;

/// Default bridge-to-building search radius in metres.
pub const BUILDING_RADIUS_M: f64 = 2_000.0;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("input is not valid GeoJSON: {0}")]
    Json(String),
    #[error("expected a FeatureCollection")]
    NotFeatureCollection,
    #[error("street network is empty ({malformed} malformed features skipped)")]
    EmptyNetwork { malformed: usize },
    #[error("no street nodes available for snapping")]
    NoStreetsAvailable,
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Bridge,
    Street,
    Building,
}

impl NodeKind {
    pub fn one_hot_index(self) -> usize {
        match self {
            NodeKind::Bridge => 0,
            NodeKind::Street => 1,
            NodeKind::Building => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildingCategory {
    Shop,
    Hospital,
    Residence,
}

impl BuildingCategory {
    /// In argmax tie-break order.
    pub const ALL: [BuildingCategory; 3] = [BuildingCategory::Shop, BuildingCategory::Hospital, BuildingCategory::Residence];

    pub fn index(self) -> usize {
        match self {
            BuildingCategory::Shop => 0,
            BuildingCategory::Hospital => 1,
            BuildingCategory::Residence => 2,
        }
    }

    pub fn relation(self) -> RelationKind {
        match self {
            BuildingCategory::Shop => RelationKind::ToShop,
            BuildingCategory::Hospital => RelationKind::ToHospital,
            BuildingCategory::Residence => RelationKind::ToResidence,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BuildingCategory::Shop => "shop",
            BuildingCategory::Hospital => "hospital",
            BuildingCategory::Residence => "residence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    StreetToStreet,
    StreetToBridge,
    ToShop,
    ToHospital,
    ToResidence,
}

impl RelationKind {
    pub const ALL: [RelationKind; 5] = [
        RelationKind::StreetToStreet,
        RelationKind::StreetToBridge,
        RelationKind::ToShop,
        RelationKind::ToHospital,
        RelationKind::ToResidence,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn building_category(self) -> Option<BuildingCategory> {
        match self {
            RelationKind::ToShop => Some(BuildingCategory::Shop),
            RelationKind::ToHospital => Some(BuildingCategory::Hospital),
            RelationKind::ToResidence => Some(BuildingCategory::Residence),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub geo: GeoPoint,
    pub plane: PlanePoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<BuildingCategory>,
    /// Streets: lies on a trunk segment. Bridges: `highway_count > 0`.
    pub is_highway: bool,
    /// Bridges only: trunk street nodes within network reach.
    #[serde(default)]
    pub highway_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year_built: Option<f64>,
}

/// A typed edge. `street_to_street` edges are stored once per undirected pair
/// with `src < dst`; `street_to_bridge` edges run street → bridge; `to_*`
/// edges run bridge → building.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub length_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HetGraph {
    nodes: Vec<Node>,
    edges: Vec<Vec<Edge>>,
}

/// Compressed adjacency: `neighbors(i)` yields `(j, edge length)`.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<(NodeId, f64)>,
}

impl Adjacency {
    /// Builds an adjacency over `n` nodes. Neighbor lists are sorted by id.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (NodeId, NodeId, f64)>) -> Self {
        let mut lists: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
        for (a, b, w) in pairs {
            lists[a].push((b, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for mut l in lists {
            l.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
            targets.extend(l);
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, i: NodeId) -> &[(NodeId, f64)] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

impl HetGraph {
    /// Assembles nodes from ingested inputs and adds `street_to_street` edges.
    pub fn assemble(streets: &StreetNetwork, bridges: &[BridgeRecord], buildings: &[BuildingRecord]) -> Self {
        let mut nodes = Vec::with_capacity(streets.vertices.len() + bridges.len() + buildings.len());
        for (i, (geo, plane)) in streets.vertices.iter().zip(&streets.planes).enumerate() {
            nodes.push(Node {
                id: i,
                kind: NodeKind::Street,
                geo: *geo,
                plane: *plane,
                name: None,
                category: None,
                is_highway: streets.trunk[i],
                highway_count: 0,
                span_m: None,
                year_built: None,
            });
        }
        for b in bridges {
            nodes.push(Node {
                id: nodes.len(),
                kind: NodeKind::Bridge,
                geo: b.geo,
                plane: b.plane,
                name: Some(b.name.clone()),
                category: None,
                is_highway: false,
                highway_count: 0,
                span_m: b.span_m,
                year_built: b.year_built,
            });
        }
        for b in buildings {
            nodes.push(Node {
                id: nodes.len(),
                kind: NodeKind::Building,
                geo: b.geo,
                plane: b.plane,
                name: b.name.clone(),
                category: Some(b.category),
                is_highway: false,
                highway_count: 0,
                span_m: None,
                year_built: None,
            });
        }
        let mut edges = vec![Vec::new(); RelationKind::ALL.len()];
        edges[RelationKind::StreetToStreet.index()] = streets
            .segments
            .iter()
            .map(|&(a, b, length_m)| Edge { src: a, dst: b, length_m })
            .collect();
        Self { nodes, edges }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn ids_of(&self, kind: NodeKind) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.kind == kind).map(|n| n.id).collect()
    }

    pub fn bridges(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::Bridge)
    }

    pub fn count_of(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn edges(&self, rel: RelationKind) -> &[Edge] {
        &self.edges[rel.index()]
    }

    pub fn edge_count(&self, rel: RelationKind) -> usize {
        self.edges[rel.index()].len()
    }

    pub(crate) fn set_edges(&mut self, rel: RelationKind, edges: Vec<Edge>) {
        self.edges[rel.index()] = edges;
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut [Node] {
        &mut self.nodes
    }

    /// Symmetric adjacency over all nodes for one relation.
    pub fn adjacency(&self, rel: RelationKind) -> Adjacency {
        let pairs = self.edges(rel).iter().flat_map(|e| [(e.src, e.dst, e.length_m), (e.dst, e.src, e.length_m)]);
        Adjacency::from_pairs(self.nodes.len(), pairs)
    }

    /// Out-adjacency (src → dst only) for one relation.
    pub fn out_adjacency(&self, rel: RelationKind) -> Adjacency {
        let pairs = self.edges(rel).iter().map(|e| (e.src, e.dst, e.length_m));
        Adjacency::from_pairs(self.nodes.len(), pairs)
    }

    /// Street node each bridge is snapped to, indexed by node id.
    pub fn snapped_street(&self) -> Vec<Option<(NodeId, f64)>> {
        let mut out = vec![None; self.nodes.len()];
        for e in self.edges(RelationKind::StreetToBridge) {
            out[e.dst] = Some((e.src, e.length_m));
        }
        out
    }
}
