use super::{BuildingCategory, Edge, GraphError, HetGraph, NodeId, NodeKind, RelationKind, SpatialGrid, BUILDING_RADIUS_M};
use crate::geo::haversine_m;
use crate::par::{map_slice, Exec};
use serde::{Deserialize, Serialize};

/// Connects every bridge to its nearest street node (planar distance).
pub fn snap_bridges(graph: &mut HetGraph) -> Result<usize, GraphError> {
    let streets = graph.ids_of(NodeKind::Street);
    if streets.is_empty() {
        return Err(GraphError::NoStreetsAvailable);
    }
    let grid = SpatialGrid::new(streets.iter().map(|&i| graph.node(i).plane).collect(), 500.0);
    let edges: Vec<Edge> = graph
        .bridges()
        .into_iter()
        .map(|b| {
            let (local, d) = grid.nearest(graph.node(b).plane).expect("non-empty grid");
            Edge { src: streets[local], dst: b, length_m: d }
        })
        .collect();
    let n = edges.len();
    graph.set_edges(RelationKind::StreetToBridge, edges);
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k_shop: usize,
    pub k_hospital: usize,
    pub k_residence: usize,
    pub radius_m: f64,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k_shop: 5, k_hospital: 5, k_residence: 20, radius_m: BUILDING_RADIUS_M }
    }
}

impl KnnParams {
    pub fn k(&self, c: BuildingCategory) -> usize {
        match c {
            BuildingCategory::Shop => self.k_shop,
            BuildingCategory::Hospital => self.k_hospital,
            BuildingCategory::Residence => self.k_residence,
        }
    }
}

/// Bridge → building edges per category, in `BuildingCategory::ALL` order.
///
/// Candidates are buildings within `radius_m` haversine distance; the `k`
/// nearest by planar distance are kept (ties by lowest building id).
pub fn compute_knn_edges(graph: &HetGraph, params: &KnnParams, exec: Exec) -> [Vec<Edge>; 3] {
    let buildings = graph.ids_of(NodeKind::Building);
    let grid = SpatialGrid::new(buildings.iter().map(|&i| graph.node(i).plane).collect(), params.radius_m.max(1.0));
    let bridges = graph.bridges();
    let per_bridge: Vec<[Vec<Edge>; 3]> = map_slice(exec, &bridges, |&b| {
        let bn = graph.node(b);
        let mut cands: [Vec<(f64, NodeId)>; 3] = Default::default();
        for local in grid.within(bn.plane, params.radius_m * 1.01 + 1.0) {
            let id = buildings[local];
            let node = graph.node(id);
            if haversine_m(bn.geo, node.geo) > params.radius_m {
                continue;
            }
            let cat = node.category.expect("building nodes carry a category");
            cands[cat.index()].push((node.plane.distance(&bn.plane), id));
        }
        let mut out: [Vec<Edge>; 3] = Default::default();
        for cat in BuildingCategory::ALL {
            let c = &mut cands[cat.index()];
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            out[cat.index()] =
                c.iter().take(params.k(cat)).map(|&(d, id)| Edge { src: b, dst: id, length_m: d }).collect();
        }
        out
    });
    let mut result: [Vec<Edge>; 3] = Default::default();
    for edges in per_bridge {
        for (acc, e) in result.iter_mut().zip(edges) {
            acc.extend(e);
        }
    }
    result
}

/// Replaces the `to_*` relations with freshly computed k-NN edges.
pub fn knn_building_edges(graph: &mut HetGraph, params: &KnnParams, exec: Exec) {
    let [shop, hospital, residence] = compute_knn_edges(graph, params, exec);
    graph.set_edges(RelationKind::ToShop, shop);
    graph.set_edges(RelationKind::ToHospital, hospital);
    graph.set_edges(RelationKind::ToResidence, residence);
}
