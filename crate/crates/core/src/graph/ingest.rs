//! GeoJSON ingestion for streets, bridges and buildings.

use super::{BuildingCategory, GraphError, SpatialGrid};
use crate::geo::{haversine_m, project, GeoPoint, PlanePoint};
use geojson::{Feature, GeoJson, JsonObject, Value};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

/// Property keys used to interpret input features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertyKeys {
    pub highway: String,
    pub trunk_values: Vec<String>,
    pub name: String,
    pub span: String,
    pub year_built: String,
    pub amenity: String,
    pub shop: String,
    pub building: String,
    /// Explicit category override (`shop`, `hospital`, `residence`).
    pub category: String,
}

impl Default for PropertyKeys {
    fn default() -> Self {
        Self {
            highway: "highway".into(),
            trunk_values: vec!["trunk".into(), "trunk_link".into()],
            name: "name".into(),
            span: "span_length".into(),
            year_built: "year_built".into(),
            amenity: "amenity".into(),
            shop: "shop".into(),
            building: "building".into(),
            category: "category".into(),
        }
    }
}

/// Per-file ingestion counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub features: usize,
    pub kept: usize,
    pub malformed: usize,
    pub unnamed: usize,
    pub unknown_category: usize,
    pub outside_buffer: usize,
    pub out_of_zone: usize,
}

#[derive(Debug, Clone)]
pub struct StreetNetwork {
    pub vertices: Vec<GeoPoint>,
    pub planes: Vec<PlanePoint>,
    pub trunk: Vec<bool>,
    /// `(a, b, length_m)` with `a < b`, unique.
    pub segments: Vec<(usize, usize, f64)>,
    pub report: IngestReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeRecord {
    pub name: String,
    pub geo: GeoPoint,
    pub plane: PlanePoint,
    pub span_m: Option<f64>,
    pub year_built: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingRecord {
    pub name: Option<String>,
    pub geo: GeoPoint,
    pub plane: PlanePoint,
    pub category: BuildingCategory,
}

fn parse_features(source: &str) -> Result<Vec<Feature>, GraphError> {
    match source.parse::<GeoJson>().map_err(|e| GraphError::Json(e.to_string()))? {
        GeoJson::FeatureCollection(fc) => Ok(fc.features),
        _ => Err(GraphError::NotFeatureCollection),
    }
}

fn position(p: &[f64]) -> Option<GeoPoint> {
    match p {
        [lon, lat, ..] => GeoPoint::new(*lat, *lon).ok(),
        _ => None,
    }
}

fn prop<'a>(props: Option<&'a JsonObject>, key: &str) -> Option<&'a serde_json::Value> {
    props.and_then(|p| p.get(key)).filter(|v| !v.is_null())
}

fn prop_str<'a>(props: Option<&'a JsonObject>, key: &str) -> Option<&'a str> {
    prop(props, key).and_then(|v| v.as_str()).map(str::trim).filter(|s| !s.is_empty())
}

fn prop_number(props: Option<&JsonObject>, key: &str) -> Option<f64> {
    match prop(props, key)? {
        serde_json::Value::Number(n) => n.as_f64(),
        serde_json::Value::String(s) => {
            let s = s.trim();
            s.parse::<f64>().ok().or_else(|| {
                // "1965-04-01" style dates: take the leading year.
                let digits: String = s.chars().take_while(|c| c.is_ascii_digit()).collect();
                (digits.len() == 4).then(|| digits.parse().ok()).flatten()
            })
        }
        _ => None,
    }
    .filter(|v| v.is_finite())
}

/// Area-weighted centroid of a ring in lon/lat, falling back to the vertex mean.
fn ring_centroid(ring: &[Vec<f64>]) -> Option<GeoPoint> {
    let pts: Vec<GeoPoint> = ring.iter().map(|p| position(p)).collect::<Option<_>>()?;
    if pts.is_empty() {
        return None;
    }
    let (mut area2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    let (ox, oy) = (pts[0].lon, pts[0].lat);
    for w in pts.windows(2) {
        let (x0, y0, x1, y1) = (w[0].lon - ox, w[0].lat - oy, w[1].lon - ox, w[1].lat - oy);
        let cross = x0 * y1 - x1 * y0;
        area2 += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    if area2.abs() > 1e-18 {
        return GeoPoint::new(oy + cy / (3.0 * area2), ox + cx / (3.0 * area2)).ok();
    }
    vertex_mean(&pts)
}

fn vertex_mean(pts: &[GeoPoint]) -> Option<GeoPoint> {
    if pts.is_empty() {
        return None;
    }
    let n = pts.len() as f64;
    GeoPoint::new(pts.iter().map(|p| p.lat).sum::<f64>() / n, pts.iter().map(|p| p.lon).sum::<f64>() / n).ok()
}

/// Representative point of a point, line or polygon geometry.
fn representative_point(value: &Value) -> Option<GeoPoint> {
    match value {
        Value::Point(p) => position(p),
        Value::LineString(line) => vertex_mean(&line.iter().map(|p| position(p)).collect::<Option<Vec<_>>>()?),
        Value::Polygon(rings) => ring_centroid(rings.first()?),
        Value::MultiPolygon(polys) => {
            // largest-by-vertex-count polygon keeps the choice deterministic
            let ring = polys.iter().filter_map(|p| p.first()).max_by_key(|r| r.len())?;
            ring_centroid(ring)
        }
        _ => None,
    }
}

fn located(geo: GeoPoint, report: &mut IngestReport) -> Option<PlanePoint> {
    match project(geo) {
        Ok(p) => Some(p),
        Err(_) => {
            report.out_of_zone += 1;
            None
        }
    }
}

/// Reads drivable-road line features into street vertices and segments.
///
/// Vertices closer than 1e-7 degrees are merged. Each consecutive vertex
/// pair yields one undirected segment; both endpoints of a segment on a
/// trunk-class line are flagged as trunk nodes.
pub fn ingest_streets(source: &str, keys: &PropertyKeys) -> Result<StreetNetwork, GraphError> {
    let features = parse_features(source)?;
    let mut report = IngestReport { features: features.len(), ..Default::default() };
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut net = StreetNetwork {
        vertices: Vec::new(),
        planes: Vec::new(),
        trunk: Vec::new(),
        segments: Vec::new(),
        report: IngestReport::default(),
    };
    let mut seen: HashSet<(usize, usize)> = HashSet::new();

    for f in &features {
        let props = f.properties.as_ref();
        let Some(class) = prop_str(props, &keys.highway) else {
            report.malformed += 1;
            continue;
        };
        let is_trunk = keys.trunk_values.iter().any(|t| t == class);
        let lines: Vec<&Vec<Vec<f64>>> = match f.geometry.as_ref().map(|g| &g.value) {
            Some(Value::LineString(l)) => vec![l],
            Some(Value::MultiLineString(ls)) => ls.iter().collect(),
            _ => {
                report.malformed += 1;
                continue;
            }
        };
        let parsed: Option<Vec<Vec<GeoPoint>>> =
            lines.iter().map(|l| l.iter().map(|p| position(p)).collect::<Option<Vec<_>>>()).collect();
        let Some(parsed) = parsed.filter(|ls| ls.iter().all(|l| l.len() >= 2)) else {
            report.malformed += 1;
            continue;
        };
        let mut planes = Vec::with_capacity(parsed.len());
        let mut in_zone = true;
        for line in &parsed {
            let p: Result<Vec<_>, _> = line.iter().map(|g| project(*g)).collect();
            match p {
                Ok(p) => planes.push(p),
                Err(_) => in_zone = false,
            }
        }
        if !in_zone {
            report.out_of_zone += 1;
            continue;
        }
        report.kept += 1;
        for (line, line_planes) in parsed.iter().zip(&planes) {
            let ids: Vec<usize> = line
                .iter()
                .zip(line_planes)
                .map(|(g, p)| {
                    let key = ((g.lat * 1e7).round() as i64, (g.lon * 1e7).round() as i64);
                    *index.entry(key).or_insert_with(|| {
                        net.vertices.push(*g);
                        net.planes.push(*p);
                        net.trunk.push(false);
                        net.vertices.len() - 1
                    })
                })
                .collect();
            for w in ids.windows(2) {
                let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
                if a == b {
                    continue;
                }
                if is_trunk {
                    net.trunk[a] = true;
                    net.trunk[b] = true;
                }
                if seen.insert((a, b)) {
                    net.segments.push((a, b, haversine_m(net.vertices[a], net.vertices[b])));
                }
            }
        }
    }
    if net.segments.is_empty() {
        return Err(GraphError::EmptyNetwork { malformed: report.malformed });
    }
    net.report = report;
    Ok(net)
}

/// Reads named bridge features; each becomes one node at its centroid.
pub fn ingest_bridges(source: &str, keys: &PropertyKeys) -> Result<(Vec<BridgeRecord>, IngestReport), GraphError> {
    let features = parse_features(source)?;
    let mut report = IngestReport { features: features.len(), ..Default::default() };
    let mut out = Vec::new();
    for f in &features {
        let props = f.properties.as_ref();
        let Some(geo) = f.geometry.as_ref().and_then(|g| representative_point(&g.value)) else {
            report.malformed += 1;
            continue;
        };
        let Some(name) = prop_str(props, &keys.name) else {
            report.unnamed += 1;
            continue;
        };
        let Some(plane) = located(geo, &mut report) else { continue };
        out.push(BridgeRecord {
            name: name.to_string(),
            geo,
            plane,
            span_m: prop_number(props, &keys.span),
            year_built: prop_number(props, &keys.year_built),
        });
    }
    report.kept = out.len();
    Ok((out, report))
}

fn resolve_category(props: Option<&JsonObject>, keys: &PropertyKeys) -> Option<BuildingCategory> {
    if let Some(c) = prop_str(props, &keys.category) {
        return match c {
            "shop" => Some(BuildingCategory::Shop),
            "hospital" => Some(BuildingCategory::Hospital),
            "residence" | "residential" => Some(BuildingCategory::Residence),
            _ => None,
        };
    }
    if prop_str(props, &keys.amenity) == Some("hospital") {
        return Some(BuildingCategory::Hospital);
    }
    if prop_str(props, &keys.shop).is_some_and(|s| s != "no") {
        return Some(BuildingCategory::Shop);
    }
    if prop_str(props, &keys.building) == Some("residential") {
        return Some(BuildingCategory::Residence);
    }
    None
}

/// Reads shop/hospital/residence features, keeping those within `radius_m`
/// (haversine) of at least one bridge.
pub fn ingest_buildings(
    source: &str,
    bridges: &[BridgeRecord],
    keys: &PropertyKeys,
    radius_m: f64,
) -> Result<(Vec<BuildingRecord>, IngestReport), GraphError> {
    let features = parse_features(source)?;
    let mut report = IngestReport { features: features.len(), ..Default::default() };
    let grid = SpatialGrid::new(bridges.iter().map(|b| b.plane).collect(), radius_m.max(1.0));
    let mut out = Vec::new();
    for f in &features {
        let props = f.properties.as_ref();
        let Some(geo) = f.geometry.as_ref().and_then(|g| representative_point(&g.value)) else {
            report.malformed += 1;
            continue;
        };
        let Some(category) = resolve_category(props, keys) else {
            report.unknown_category += 1;
            continue;
        };
        let Some(plane) = located(geo, &mut report) else { continue };
        let near = grid.within(plane, radius_m * 1.01 + 1.0).into_iter().any(|i| haversine_m(bridges[i].geo, geo) <= radius_m);
        if !near {
            report.outside_buffer += 1;
            continue;
        }
        out.push(BuildingRecord { name: prop_str(props, &keys.name).map(String::from), geo, plane, category });
    }
    report.kept = out.len();
    Ok((out, report))
}
