//! 21-dimensional node features.
//!
//! | idx | feature |
//! |-----|---------|
//! | 0 | span length (m), bridges |
//! | 1 | (year built - 1900) / 100, bridges |
//! | 2 | degree centrality over all relations |
//! | 3 | normalized betweenness (bridges inherit their snapped street node's) |
//! | 4 | ln(1 + highway metapath count), bridges |
//! | 5-7 | ln(1 + to_shop / to_hospital / to_residence out-degree), bridges |
//! | 8 | is_highway |
//! | 9-11 | one-hot kind: bridge, street, building |
//! | 12-13 | min-max normalized plane x, y |
//! | 14 | ln(1 + network distance to nearest trunk node), streets and bridges |
//! | 15 | ln(1 + street nodes within 500 m), streets and bridges |
//! | 16-18 | ln(1 + nearest shop / hospital / residence distance, capped at the radius), bridges |
//! | 19 | ln(1 + buildings within the radius), bridges |
//! | 20 | constant 1 |
//!
//! Missing bridge attributes are 0; bridge-only slots are 0 for other kinds.

use super::{
    betweenness_with, nearest_highway_distances, BuildingCategory, HetGraph, NodeKind, RelationKind, SpatialGrid,
    BUILDING_RADIUS_M, NEAREST_HIGHWAY_CAP_M,
};
use crate::geo::haversine_m;
use crate::par::{for_each_row, Exec};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub const FEATURE_DIM: usize = 21;
const LOCAL_DENSITY_RADIUS_M: f64 = 500.0;

/// Row `i` holds the features of node id `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub data: Array2<f64>,
}

impl NodeFeatures {
    pub fn row(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }
}

pub fn build_features(graph: &HetGraph) -> NodeFeatures {
    build_features_with(graph, Exec::default())
}

pub fn build_features_with(graph: &HetGraph, exec: Exec) -> NodeFeatures {
    let n = graph.node_count();
    let betweenness = betweenness_with(graph, exec);
    let nearest_trunk = nearest_highway_distances(graph);
    let snapped = graph.snapped_street();

    let mut degree = vec![0usize; n];
    for rel in RelationKind::ALL {
        for e in graph.edges(rel) {
            degree[e.src] += 1;
            degree[e.dst] += 1;
        }
    }
    let mut out_degree = vec![[0usize; 3]; n];
    for cat in BuildingCategory::ALL {
        for e in graph.edges(cat.relation()) {
            out_degree[e.src][cat.index()] += 1;
        }
    }

    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for node in graph.nodes() {
        x_lo = x_lo.min(node.plane.x);
        x_hi = x_hi.max(node.plane.x);
        y_lo = y_lo.min(node.plane.y);
        y_hi = y_hi.max(node.plane.y);
    }
    let scale = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };

    let streets = graph.ids_of(NodeKind::Street);
    let street_grid = SpatialGrid::new(streets.iter().map(|&i| graph.node(i).plane).collect(), LOCAL_DENSITY_RADIUS_M);
    let buildings = graph.ids_of(NodeKind::Building);
    let building_grid = SpatialGrid::new(buildings.iter().map(|&i| graph.node(i).plane).collect(), BUILDING_RADIUS_M);
    let degree_norm = if n > 1 { (n - 1) as f64 } else { 1.0 };

    let mut data = Array2::<f64>::zeros((n, FEATURE_DIM));
    let slice = data.as_slice_mut().expect("standard layout");
    for_each_row(exec, slice, FEATURE_DIM, |i, row| {
        let node = graph.node(i);
        row[2] = degree[i] as f64 / degree_norm;
        row[8] = if node.is_highway { 1.0 } else { 0.0 };
        row[9 + node.kind.one_hot_index()] = 1.0;
        row[12] = scale(node.plane.x, x_lo, x_hi);
        row[13] = scale(node.plane.y, y_lo, y_hi);
        row[20] = 1.0;
        match node.kind {
            NodeKind::Street => {
                row[3] = betweenness[i];
                row[14] = nearest_trunk[i].ln_1p();
                row[15] = (street_grid.within(node.plane, LOCAL_DENSITY_RADIUS_M).len() as f64).ln_1p();
            }
            NodeKind::Bridge => {
                row[0] = node.span_m.unwrap_or(0.0);
                row[1] = node.year_built.map(|y| (y - 1900.0) / 100.0).unwrap_or(0.0);
                row[4] = (node.highway_count as f64).ln_1p();
                for c in 0..3 {
                    row[5 + c] = (out_degree[i][c] as f64).ln_1p();
                }
                let trunk_dist = match snapped[i] {
                    Some((s, d)) => (nearest_trunk[s] + d).min(NEAREST_HIGHWAY_CAP_M),
                    None => NEAREST_HIGHWAY_CAP_M,
                };
                if let Some((s, _)) = snapped[i] {
                    row[3] = betweenness[s];
                }
                row[14] = trunk_dist.ln_1p();
                row[15] = (street_grid.within(node.plane, LOCAL_DENSITY_RADIUS_M).len() as f64).ln_1p();
                let mut nearest = [BUILDING_RADIUS_M; 3];
                let mut in_radius = 0usize;
                for local in building_grid.within(node.plane, BUILDING_RADIUS_M * 1.01 + 1.0) {
                    let b = graph.node(buildings[local]);
                    if haversine_m(node.geo, b.geo) > BUILDING_RADIUS_M {
                        continue;
                    }
                    in_radius += 1;
                    let c = b.category.expect("building category").index();
                    nearest[c] = nearest[c].min(b.plane.distance(&node.plane));
                }
                for c in 0..3 {
                    row[16 + c] = nearest[c].ln_1p();
                }
                row[19] = (in_radius as f64).ln_1p();
            }
            NodeKind::Building => {}
        }
    });
    NodeFeatures { data }
}
