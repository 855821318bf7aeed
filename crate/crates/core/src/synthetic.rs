//! Deterministic synthetic cities as GeoJSON, for demos, tests and benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    /// Street grid vertices per side.
    pub grid: usize,
    pub spacing_deg: f64,
    pub origin: (f64, f64),
    pub bridges: usize,
    pub shops: usize,
    pub hospitals: usize,
    pub residences: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            grid: 14,
            spacing_deg: 0.01,
            origin: (36.0, 139.9),
            bridges: 30,
            shops: 120,
            hospitals: 12,
            residences: 300,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCity {
    pub streets: String,
    pub bridges: String,
    pub buildings: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityFiles {
    pub streets: PathBuf,
    pub bridges: PathBuf,
    pub buildings: PathBuf,
}

fn collection(features: Vec<Value>) -> String {
    json!({ "type": "FeatureCollection", "features": features }).to_string()
}

fn point(lat: f64, lon: f64, props: Value) -> Value {
    json!({ "type": "Feature", "geometry": { "type": "Point", "coordinates": [lon, lat] }, "properties": props })
}

impl SyntheticCity {
    /// Grid streets with a trunk road along the southern edge, bridges near
    /// grid vertices, shops in the east, hospitals in the middle, residences in the west.
    pub fn generate(p: &SyntheticParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let (lat0, lon0) = p.origin;
        let at = |r: usize, c: usize| (lat0 + r as f64 * p.spacing_deg, lon0 + c as f64 * p.spacing_deg);
        let extent = (p.grid.max(2) - 1) as f64 * p.spacing_deg;

        let mut streets = Vec::new();
        for r in 0..p.grid {
            let coords: Vec<[f64; 2]> = (0..p.grid).map(|c| at(r, c)).map(|(la, lo)| [lo, la]).collect();
            let kind = if r == 0 { "trunk" } else { "residential" };
            streets.push(json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": coords },
                "properties": { "highway": kind, "name": format!("Row {r}") }
            }));
        }
        for c in 0..p.grid {
            let coords: Vec<[f64; 2]> = (0..p.grid).map(|r| at(r, c)).map(|(la, lo)| [lo, la]).collect();
            streets.push(json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": coords },
                "properties": { "highway": "secondary", "name": format!("Column {c}") }
            }));
        }

        let jitter = p.spacing_deg * 0.3;
        let bridges = (0..p.bridges)
            .map(|i| {
                let (la, lo) = at(rng.random_range(0..p.grid), rng.random_range(0..p.grid));
                point(
                    la + rng.random_range(-jitter..jitter),
                    lo + rng.random_range(-jitter..jitter),
                    json!({
                        "name": format!("Bridge {:03}", i + 1),
                        "span_length": (rng.random_range(8.0..120.0f64) * 10.0).round() / 10.0,
                        "year_built": format!("{}-04-01", rng.random_range(1950..2015)),
                    }),
                )
            })
            .collect();

        let mut buildings = Vec::new();
        for i in 0..p.shops {
            // shops concentrate in the eastern third
            let la = lat0 + rng.random_range(0.0..1.0) * extent;
            let lo = lon0 + extent * (2.0 / 3.0 + rng.random_range(0.0..1.0) / 3.0);
            buildings.push(point(la, lo, json!({ "shop": "supermarket", "name": format!("Shop {i}") })));
        }
        for i in 0..p.hospitals {
            // hospitals in the central band
            let la = lat0 + rng.random_range(0.0..1.0) * extent;
            let lo = lon0 + extent * (0.4 + rng.random_range(0.0..0.2));
            buildings.push(point(la, lo, json!({ "amenity": "hospital", "name": format!("Hospital {i}") })));
        }
        for _ in 0..p.residences {
            // residences concentrate in the western third
            let la = lat0 + rng.random_range(0.0..1.0) * extent;
            let lo = lon0 + rng.random_range(0.0..1.0) * extent / 3.0;
            buildings.push(point(la, lo, json!({ "building": "residential" })));
        }
        Self { streets: collection(streets), bridges: collection(bridges), buildings: collection(buildings) }
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<CityFiles> {
        std::fs::create_dir_all(dir)?;
        let files = CityFiles {
            streets: dir.join("streets.geojson"),
            bridges: dir.join("bridges.geojson"),
            buildings: dir.join("buildings.geojson"),
        };
        std::fs::write(&files.streets, &self.streets)?;
        std::fs::write(&files.bridges, &self.bridges)?;
        std::fs::write(&files.buildings, &self.buildings)?;
        Ok(files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ingest_bridges, ingest_buildings, ingest_streets, PropertyKeys};

    #[test]
    fn generated_city_ingests() {
        let p = SyntheticParams::default();
        let city = SyntheticCity::generate(&p);
        let keys = PropertyKeys::default();
        let streets = ingest_streets(&city.streets, &keys).unwrap();
        assert_eq!(streets.vertices.len(), p.grid * p.grid);
        assert_eq!(streets.trunk.iter().filter(|&&t| t).count(), p.grid);
        let (bridges, report) = ingest_bridges(&city.bridges, &keys).unwrap();
        assert_eq!((bridges.len(), report.unnamed), (30, 0));
        assert!(bridges.iter().all(|b| b.span_m.is_some() && b.year_built.is_some()));
        let (buildings, _) = ingest_buildings(&city.buildings, &bridges, &keys, 2000.0).unwrap();
        assert!(!buildings.is_empty());
        assert_eq!(city, SyntheticCity::generate(&p));
    }
}
