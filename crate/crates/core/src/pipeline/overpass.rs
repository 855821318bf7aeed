//! Overpass API queries and conversion of their JSON answers to the three
//! GeoJSON inputs. The HTTP transfer itself lives in the CLI.

use serde_json::{json, Map, Value};

/// `(south, west, north, east)` in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl BBox {
    pub fn parse(s: &str) -> Result<Self, OverpassError> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| OverpassError::BadBBox(s.to_string()))?;
        match v[..] {
            [south, west, north, east] if south < north && west < east => Ok(Self { south, west, north, east }),
            _ => Err(OverpassError::BadBBox(s.to_string())),
        }
    }

    fn filter(&self) -> String {
        format!("({},{},{},{})", self.south, self.west, self.north, self.east)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OverpassError {
    #[error("bbox must be south,west,north,east with south < north and west < east, got {0:?}")]
    BadBBox(String),
    #[error("not an Overpass JSON answer: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Queries {
    pub streets: String,
    pub bridges: String,
    pub buildings: String,
}

pub fn queries(bbox: &BBox) -> Queries {
    let b = bbox.filter();
    Queries {
        streets: format!(
            "[out:json][timeout:180];way[\"highway\"~\"^(motorway|motorway_link|trunk|trunk_link|primary|secondary|tertiary|unclassified|residential)$\"]{b};out geom;"
        ),
        bridges: format!("[out:json][timeout:180];way[\"bridge\"=\"yes\"][\"highway\"]{b};out geom;"),
        buildings: format!(
            "[out:json][timeout:180];(nwr[\"shop\"]{b};nwr[\"amenity\"=\"hospital\"]{b};nwr[\"building\"=\"residential\"]{b};);out center;"
        ),
    }
}

fn lat_lon(v: &Value) -> Option<[f64; 2]> {
    Some([v.get("lon")?.as_f64()?, v.get("lat")?.as_f64()?])
}

/// Converts an Overpass JSON answer into a FeatureCollection. Ways with
/// inline geometry become LineStrings, everything else a Point (node
/// position or element center). Tags become properties. Elements without
/// any position are skipped.
pub fn to_geojson(answer: &str) -> Result<String, OverpassError> {
    let doc: Value = serde_json::from_str(answer).map_err(|e| OverpassError::Malformed(e.to_string()))?;
    let elements = doc
        .get("elements")
        .and_then(Value::as_array)
        .ok_or_else(|| OverpassError::Malformed("missing elements array".into()))?;
    let mut features = Vec::new();
    for el in elements {
        let line: Option<Vec<[f64; 2]>> =
            el.get("geometry").and_then(Value::as_array).map(|g| g.iter().filter_map(lat_lon).collect());
        let geometry = match line {
            Some(coords) if coords.len() >= 2 => json!({ "type": "LineString", "coordinates": coords }),
            _ => match lat_lon(el).or_else(|| el.get("center").and_then(lat_lon)) {
                Some(p) => json!({ "type": "Point", "coordinates": p }),
                None => continue,
            },
        };
        let mut props = el.get("tags").and_then(Value::as_object).cloned().unwrap_or_else(Map::new);
        if let (Some(kind), Some(id)) = (el.get("type").and_then(Value::as_str), el.get("id")) {
            props.insert("osm_id".into(), json!(format!("{kind}/{id}")));
        }
        features.push(json!({ "type": "Feature", "geometry": geometry, "properties": props }));
    }
    Ok(json!({ "type": "FeatureCollection", "features": features }).to_string())
}
