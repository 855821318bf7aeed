mod common;

use bridgerole::graph::{betweenness_with, BuildingCategory, NodeKind, RelationKind, FEATURE_DIM};
use bridgerole::par::Exec;
use bridgerole::pipeline::{build, ingest_sources, PipelineConfig};
use bridgerole::synthetic::{SyntheticCity, SyntheticParams};
use common::*;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn betweenness_matches_all_pairs_oracle() {
    let mut r = rng(20);
    for case in 0..200 {
        let n = r.random_range(1..=12);
        let p = [0.15, 0.3, 0.6][case % 3];
        let edges = random_edges(&mut r, n, p);
        let g = street_graph(n, &edges);
        let got = betweenness_with(&g, Exec::Sequential);
        let want = betweenness_oracle(n, &edges);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "case {case}: {got:?} vs {want:?} on {edges:?}");
        }
        assert_eq!(got, betweenness_with(&g, Exec::Parallel));
    }
}

#[test]
fn synthetic_city_graph_structure() {
    let p = SyntheticParams::default();
    let city = SyntheticCity::generate(&p);
    let config = PipelineConfig::default();
    let inputs = ingest_sources(&city.streets, &city.bridges, &city.buildings, &config).unwrap();
    let built = build(&inputs, &config, Exec::Parallel).unwrap();
    let g = &built.graph;

    // ids run streets, bridges, buildings
    let kinds: Vec<NodeKind> = g.nodes().iter().map(|n| n.kind).collect();
    let first_bridge = kinds.iter().position(|&k| k == NodeKind::Bridge).unwrap();
    let first_building = kinds.iter().position(|&k| k == NodeKind::Building).unwrap();
    assert_eq!(first_bridge, p.grid * p.grid);
    assert!(kinds[..first_bridge].iter().all(|&k| k == NodeKind::Street));
    assert!(kinds[first_bridge..first_building].iter().all(|&k| k == NodeKind::Bridge));
    assert!(kinds[first_building..].iter().all(|&k| k == NodeKind::Building));
    assert!(g.nodes().iter().enumerate().all(|(i, n)| n.id == i));

    assert_eq!(g.edge_count(RelationKind::StreetToBridge), p.bridges);
    for cat in BuildingCategory::ALL {
        let k = config.knn().k(cat);
        let edges = g.edges(cat.relation());
        for b in g.bridges() {
            let mine: Vec<_> = edges.iter().filter(|e| e.src == b).collect();
            assert!(mine.len() <= k);
            for e in mine {
                let (s, t) = (g.node(e.src), g.node(e.dst));
                assert_eq!(t.category, Some(cat));
                assert!(haversine_oracle(s.geo.lat, s.geo.lon, t.geo.lat, t.geo.lon) <= config.radius_m + 1e-6);
            }
        }
    }

    assert_eq!(built.features.data.dim(), (g.node_count(), FEATURE_DIM));
    assert!(built.features.data.iter().all(|v| v.is_finite()));
    let seq = build(&inputs, &config, Exec::Sequential).unwrap();
    assert_eq!(seq, built);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn betweenness_is_normalized(n in 3usize..12, seed in any::<u64>()) {
        let mut r = rng(seed);
        let edges = random_edges(&mut r, n, 0.4);
        let b = betweenness_with(&street_graph(n, &edges), Exec::Parallel);
        prop_assert!(b.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
    }
}
