//! Brute-force oracles and fixture builders shared by the integration and
//! acceptance tests. Nothing here calls the code it checks.
#![allow(dead_code)]

use bridgerole::graph::{BuildingCategory, HetGraph, IngestReport, StreetNetwork};
use bridgerole::metapath::BridgeCategory;
use bridgerole::geo::{project, GeoPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::collections::VecDeque;

pub const NOISE: i64 = -1;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Great-circle distance on the 6,371 km sphere.
pub fn haversine_oracle(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * 6_371_000.0 * h.sqrt().asin()
}

/// Street-only graph with `n` vertices and the given undirected edges.
pub fn street_graph(n: usize, edges: &[(usize, usize)]) -> HetGraph {
    let vertices: Vec<GeoPoint> =
        (0..n).map(|i| GeoPoint::new(36.0 + 0.001 * (i / 4) as f64, 139.8 + 0.001 * (i % 4) as f64).unwrap()).collect();
    let planes = vertices.iter().map(|&g| project(g).unwrap()).collect();
    let segments = edges.iter().map(|&(a, b)| (a.min(b), a.max(b), 1.0)).collect();
    let network = StreetNetwork { vertices, planes, trunk: vec![false; n], segments, report: IngestReport::default() };
    HetGraph::assemble(&network, &[], &[])
}

pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Betweenness from all-pairs BFS distances and path counts:
/// `Σ_{s<t} σ_st(v) / σ_st`, normalized per component by `(c−1)(c−2)/2`.
pub fn betweenness_oracle(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a != b && !adj[a].contains(&b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let bfs = |s: usize| {
        let mut dist = vec![usize::MAX; n];
        let mut sigma = vec![0.0f64; n];
        dist[s] = 0;
        sigma[s] = 1.0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    q.push_back(w);
                }
                if dist[w] == dist[u] + 1 {
                    sigma[w] += sigma[u];
                }
            }
        }
        (dist, sigma)
    };
    let all: Vec<(Vec<usize>, Vec<f64>)> = (0..n).map(bfs).collect();
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let d = all[s].0[t];
            if d == usize::MAX {
                continue;
            }
            for v in 0..n {
                if v == s || v == t || all[s].0[v] == usize::MAX || all[v].0[t] == usize::MAX {
                    continue;
                }
                if all[s].0[v] + all[v].0[t] == d {
                    bc[v] += all[s].1[v] * all[v].1[t] / all[s].1[t];
                }
            }
        }
    }
    (0..n)
        .map(|v| {
            let c = (0..n).filter(|&u| all[v].0[u] != usize::MAX).count() as f64;
            if c < 3.0 {
                0.0
            } else {
                bc[v] / ((c - 1.0) * (c - 2.0) / 2.0)
            }
        })
        .collect()
}

/// Clusters renumbered in order of first appearance.
pub fn relabel(labels: &[i64]) -> Vec<i64> {
    let mut seen: Vec<i64> = Vec::new();
    labels
        .iter()
        .map(|&l| {
            if l == NOISE {
                return NOISE;
            }
            match seen.iter().position(|&s| s == l) {
                Some(i) => i as i64,
                None => {
                    seen.push(l);
                    seen.len() as i64 - 1
                }
            }
        })
        .collect()
}

/// HDBSCAN by direct condensation: sweep the mutual-reachability threshold
/// down from the top, split wherever the graph disconnects into two or more
/// clusters of at least `mcs` points, accumulate excess of mass and select.
pub mod hdbscan_oracle {
    use super::{relabel, NOISE};

    struct Cluster {
        points: Vec<usize>,
        stability: f64,
        children: Vec<Cluster>,
    }

    fn parts(set: &[usize], mr: &[Vec<f64>], linked: &dyn Fn(f64) -> bool) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; set.len()];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for start in 0..set.len() {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            label[start] = id;
            let mut stack = vec![start];
            let mut members = Vec::new();
            while let Some(a) = stack.pop() {
                members.push(set[a]);
                for b in 0..set.len() {
                    if label[b] == usize::MAX && linked(mr[set[a]][set[b]]) {
                        label[b] = id;
                        stack.push(b);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    fn grow(points: Vec<usize>, birth: f64, mr: &[Vec<f64>], mcs: usize) -> Cluster {
        let mut cluster = Cluster { points: points.clone(), stability: 0.0, children: Vec::new() };
        let mut alive = points;
        while alive.len() > 1 {
            // weight at which `alive` first becomes connected
            let mut ws: Vec<f64> = alive.iter().flat_map(|&a| alive.iter().map(move |&b| (a, b))).map(|(a, b)| mr[a][b]).collect();
            ws.sort_by(f64::total_cmp);
            ws.dedup();
            let w = *ws.iter().find(|&&w| parts(&alive, mr, &|x| x <= w).len() == 1).unwrap();
            let lambda = 1.0 / w.max(1e-300);
            let pieces = parts(&alive, mr, &|x| x < w);
            let (big, small): (Vec<_>, Vec<_>) = pieces.into_iter().partition(|p| p.len() >= mcs);
            for p in &small {
                cluster.stability += p.len() as f64 * (lambda - birth);
            }
            if big.len() >= 2 {
                for p in big {
                    cluster.stability += p.len() as f64 * (lambda - birth);
                    cluster.children.push(grow(p, lambda, mr, mcs));
                }
                break;
            }
            match big.into_iter().next() {
                Some(p) => alive = p,
                None => break,
            }
        }
        cluster
    }

    fn select(c: &Cluster, root: bool) -> (f64, Vec<Vec<usize>>) {
        let below: Vec<(f64, Vec<Vec<usize>>)> = c.children.iter().map(|k| select(k, false)).collect();
        let sum: f64 = below.iter().map(|b| b.0).sum();
        if !root && (c.children.is_empty() || c.stability >= sum) {
            (c.stability, vec![c.points.clone()])
        } else {
            (sum, below.into_iter().flat_map(|b| b.1).collect())
        }
    }

    /// `min_samples = mcs`; the core distance counts the point itself.
    pub fn labels(points: &[[f64; 2]], mcs: usize) -> Vec<i64> {
        let n = points.len();
        let mcs = mcs.max(2);
        if n < 2 {
            return vec![NOISE; n];
        }
        let d = |a: usize, b: usize| ((points[a][0] - points[b][0]).powi(2) + (points[a][1] - points[b][1]).powi(2)).sqrt();
        let core: Vec<f64> = (0..n)
            .map(|a| {
                let mut ds: Vec<f64> = (0..n).map(|b| d(a, b)).collect();
                ds.sort_by(f64::total_cmp);
                ds[mcs.min(n) - 1]
            })
            .collect();
        let mr: Vec<Vec<f64>> =
            (0..n).map(|a| (0..n).map(|b| if a == b { 0.0 } else { d(a, b).max(core[a]).max(core[b]) }).collect()).collect();
        let root = grow((0..n).collect(), 0.0, &mr, mcs);
        let mut labels = vec![NOISE; n];
        for (i, set) in select(&root, true).1.into_iter().enumerate() {
            for p in set {
                labels[p] = i as i64;
            }
        }
        relabel(&labels)
    }
}

/// Mean silhouette over non-noise points straight from the definition.
pub fn silhouette_oracle(points: &[[f64; 2]], labels: &[i64]) -> f64 {
    let idx: Vec<usize> = (0..points.len()).filter(|&i| labels[i] != NOISE).collect();
    let d = |a: usize, b: usize| ((points[a][0] - points[b][0]).powi(2) + (points[a][1] - points[b][1]).powi(2)).sqrt();
    let mut clusters: Vec<i64> = idx.iter().map(|&i| labels[i]).collect();
    clusters.sort_unstable();
    clusters.dedup();
    let mean_to = |i: usize, c: i64, skip_self: bool| {
        let m: Vec<usize> = idx.iter().copied().filter(|&j| labels[j] == c && !(skip_self && j == i)).collect();
        (m.iter().map(|&j| d(i, j)).sum::<f64>() / m.len() as f64, m.len())
    };
    let mut total = 0.0;
    for &i in &idx {
        let (a, same) = mean_to(i, labels[i], true);
        if same == 0 {
            continue;
        }
        let b = clusters.iter().filter(|&&c| c != labels[i]).map(|&c| mean_to(i, c, false).0).fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / idx.len() as f64
}

/// Spearman from brute-force average ranks and the Pearson formula.
pub fn spearman_oracle(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&x| {
                let below = v.iter().filter(|&&y| y < x).count() as f64;
                let ties = v.iter().filter(|&&y| y == x).count() as f64;
                below + (ties + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(xs), rank(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Rule table in exact integer arithmetic with thresholds as tenths
/// (supply 9, medical 7, residential 7, balanced 3).
pub fn classification_oracle(counts: [usize; 3]) -> (BridgeCategory, f64) {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return (BridgeCategory::BalancedMultiUse, 0.0);
    }
    let cats = [BuildingCategory::Shop, BuildingCategory::Hospital, BuildingCategory::Residence];
    // first maximum in shop, hospital, residence order
    let top = (0..3).fold(0, |best, c| if counts[c] > counts[best] { c } else { best });
    let share_at_least = |tenths: usize| 10 * counts[top] >= tenths * total;
    let category = match top {
        0 if share_at_least(9) => BridgeCategory::SupplyChain,
        1 if share_at_least(7) => BridgeCategory::MedicalAccess,
        2 if share_at_least(7) => BridgeCategory::ResidentialProtection,
        _ if !share_at_least(3) => BridgeCategory::BalancedMultiUse,
        _ => BridgeCategory::Mixed(cats[top]),
    };
    (category, counts[top] as f64 / total as f64)
}

/// Hand-built city: twelve bridges 4 km apart on a street line, each with
/// its own ring of buildings in the listed (shop, hospital, residence) counts.
pub const TWELVE_BRIDGE_COUNTS: [[usize; 3]; 12] = [
    [9, 1, 0],  // share exactly 0.9
    [19, 1, 0], // 0.95
    [0, 8, 2],
    [0, 7, 3], // medical boundary 0.7
    [1, 1, 8],
    [0, 3, 7], // residential boundary 0.7
    [5, 4, 3],
    [2, 2, 6],
    [0, 0, 0],
    [4, 4, 2], // shop/hospital tie
    [0, 6, 4],
    [8, 2, 0], // 0.8 shop: below supply_min
];

pub struct CityDocs {
    pub streets: String,
    pub bridges: String,
    pub buildings: String,
}

fn feature(geometry: serde_json::Value, props: serde_json::Value) -> serde_json::Value {
    json!({ "type": "Feature", "geometry": geometry, "properties": props })
}

fn collection(features: Vec<serde_json::Value>) -> String {
    json!({ "type": "FeatureCollection", "features": features }).to_string()
}

pub fn twelve_bridge_city() -> CityDocs {
    let lat = 36.0;
    let lon = |i: usize| 139.6 + i as f64 * 0.045; // about 4 km apart
    let line: Vec<[f64; 2]> = (0..=24).map(|j| [139.6 + j as f64 * 0.0225, lat]).collect();
    let streets = collection(vec![feature(json!({ "type": "LineString", "coordinates": line }), json!({ "highway": "trunk" }))]);
    let mut bridges = Vec::new();
    let mut buildings = Vec::new();
    let tags = [json!({ "shop": "yes" }), json!({ "amenity": "hospital" }), json!({ "building": "residential" })];
    for (i, counts) in TWELVE_BRIDGE_COUNTS.iter().enumerate() {
        bridges.push(feature(json!({ "type": "Point", "coordinates": [lon(i), lat + 0.0005] }), json!({ "name": format!("B{i:02}") })));
        let mut k = 0;
        for (c, &m) in counts.iter().enumerate() {
            for _ in 0..m {
                // points on a 300 m ring around the bridge
                let angle = k as f64 * 0.37;
                k += 1;
                let at = [lon(i) + 0.0033 * angle.cos(), lat + 0.0005 + 0.0027 * angle.sin()];
                buildings.push(feature(json!({ "type": "Point", "coordinates": at }), tags[c].clone()));
            }
        }
    }
    CityDocs { streets, bridges: collection(bridges), buildings: collection(buildings) }
}
