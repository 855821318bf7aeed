use super::{
    save_json, AtStage, CitySnapshot, PipelineError, Stage, CHECKPOINT_FILE, CLASSIFICATION_FILE, EMBEDDINGS_FILE,
    METRICS_FILE, OVERLAY_FILE, SNAPSHOT_FILE,
};
use crate::graph::NodeId;
use crate::metapath::BridgeCategory;
use crate::vgae::{write_checkpoint, write_embeddings_csv, Checkpoint};
use geojson::{Feature, FeatureCollection, GeoJson, Geometry, JsonObject, Value};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

/// Classification table columns; 2D coordinates come last.
pub const CLASSIFICATION_COLUMNS: [&str; 13] = [
    "bridge_id",
    "name",
    "lat",
    "lon",
    "shop_paths",
    "hospital_paths",
    "residence_paths",
    "highway_count",
    "category",
    "confidence",
    "cluster_id",
    "u",
    "v",
];

/// One classification table row; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRow {
    pub bridge_id: NodeId,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub shop_paths: usize,
    pub hospital_paths: usize,
    pub residence_paths: usize,
    pub highway_count: usize,
    pub category: BridgeCategory,
    pub confidence: f64,
    pub cluster_id: i64,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeRow {
    pub bridge_id: NodeId,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub span_m: Option<f64>,
    pub year_built: Option<f64>,
    pub is_highway: bool,
    pub highway_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2DRow {
    pub bridge_id: NodeId,
    pub u: f64,
    pub v: f64,
    pub cluster_id: i64,
    pub category: BridgeCategory,
}

pub fn bridge_rows(s: &CitySnapshot) -> Vec<BridgeRow> {
    s.analysis
        .bridge_ids
        .iter()
        .map(|&id| {
            let n = s.graph.node(id);
            BridgeRow {
                bridge_id: id,
                name: n.name.clone().unwrap_or_default(),
                lat: n.geo.lat,
                lon: n.geo.lon,
                span_m: n.span_m,
                year_built: n.year_built,
                is_highway: n.is_highway,
                highway_count: n.highway_count,
            }
        })
        .collect()
}

pub fn classification_rows(s: &CitySnapshot) -> Vec<ClassificationRow> {
    let a = &s.analysis;
    (0..a.bridge_ids.len())
        .map(|i| {
            let n = s.graph.node(a.bridge_ids[i]);
            let p = &s.profiles[i];
            let c = &s.classifications[i];
            let [u, v] = a.embedding2d.point(i);
            ClassificationRow {
                bridge_id: n.id,
                name: n.name.clone().unwrap_or_default(),
                lat: n.geo.lat,
                lon: n.geo.lon,
                shop_paths: p.shop_paths,
                hospital_paths: p.hospital_paths,
                residence_paths: p.residence_paths,
                highway_count: p.highway_count,
                category: c.category,
                confidence: c.confidence,
                cluster_id: a.clusters.labels[i],
                u,
                v,
            }
        })
        .collect()
}

pub fn embedding2d_rows(s: &CitySnapshot) -> Vec<Embedding2DRow> {
    classification_rows(s)
        .into_iter()
        .map(|r| Embedding2DRow { bridge_id: r.bridge_id, u: r.u, v: r.v, cluster_id: r.cluster_id, category: r.category })
        .collect()
}

pub fn write_classification_csv<W: Write>(s: &CitySnapshot, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for row in classification_rows(s) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_classification_csv<R: Read>(reader: R) -> Result<Vec<ClassificationRow>, csv::Error> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

/// Point feature collection with per-bridge properties and category colors.
pub fn overlay(s: &CitySnapshot) -> FeatureCollection {
    let features = classification_rows(s)
        .into_iter()
        .map(|r| {
            let mut props = JsonObject::new();
            props.insert("bridge_id".into(), r.bridge_id.into());
            props.insert("name".into(), r.name.into());
            props.insert("category".into(), r.category.to_string().into());
            props.insert("color".into(), r.category.color().into());
            props.insert("confidence".into(), r.confidence.into());
            props.insert("shop_paths".into(), r.shop_paths.into());
            props.insert("hospital_paths".into(), r.hospital_paths.into());
            props.insert("residence_paths".into(), r.residence_paths.into());
            props.insert("highway_count".into(), r.highway_count.into());
            props.insert("cluster_id".into(), r.cluster_id.into());
            Feature {
                geometry: Some(Geometry::new(Value::Point(vec![r.lon, r.lat]))),
                properties: Some(props),
                ..Default::default()
            }
        })
        .collect();
    FeatureCollection { features, bbox: None, foreign_members: None }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("malformed overlay: {0}")]
pub struct OverlayError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayBridge {
    pub bridge_id: NodeId,
    pub lat: f64,
    pub lon: f64,
    pub category: BridgeCategory,
    pub color: String,
}

/// Parses an overlay document back into per-bridge categories.
pub fn read_overlay(text: &str) -> Result<Vec<OverlayBridge>, OverlayError> {
    let err = |m: String| OverlayError(m);
    let GeoJson::FeatureCollection(fc) = text.parse::<GeoJson>().map_err(|e| err(e.to_string()))? else {
        return Err(err("not a FeatureCollection".into()));
    };
    fc.features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let Some(Value::Point(pos)) = f.geometry.as_ref().map(|g| &g.value) else {
                return Err(err(format!("feature {i} is not a point")));
            };
            let prop = |k: &str| f.property(k).ok_or_else(|| err(format!("feature {i} lacks {k}")));
            let bridge_id = prop("bridge_id")?.as_u64().ok_or_else(|| err(format!("feature {i}: bad bridge_id")))? as NodeId;
            let category = prop("category")?
                .as_str()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err(format!("feature {i}: bad category")))?;
            let color = prop("color")?.as_str().unwrap_or_default().to_string();
            Ok(OverlayBridge { bridge_id, lat: pos[1], lon: pos[0], category, color })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub classification: PathBuf,
    pub metrics: PathBuf,
    pub overlay: PathBuf,
    pub embeddings: PathBuf,
    pub checkpoint: PathBuf,
    pub snapshot: PathBuf,
}

/// Writes every export of `s` into `dir`.
pub fn write_outputs(s: &CitySnapshot, dir: &Path) -> Result<OutputFiles, PipelineError> {
    let stage = Stage::Export;
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(stage, dir, e))?;
    let files = OutputFiles {
        classification: dir.join(CLASSIFICATION_FILE),
        metrics: dir.join(METRICS_FILE),
        overlay: dir.join(OVERLAY_FILE),
        embeddings: dir.join(EMBEDDINGS_FILE),
        checkpoint: dir.join(CHECKPOINT_FILE),
        snapshot: dir.join(SNAPSHOT_FILE),
    };
    let create = |p: &Path| std::fs::File::create(p).map(std::io::BufWriter::new).map_err(|e| PipelineError::io(stage, p, e));

    write_classification_csv(s, create(&files.classification)?).at(stage)?;
    save_json(stage, &files.metrics, &s.metrics_document())?;
    std::fs::write(&files.overlay, overlay(s).to_string()).map_err(|e| PipelineError::io(stage, &files.overlay, e))?;
    write_embeddings_csv(&s.embedding, create(&files.embeddings)?).at(stage)?;
    let checkpoint = Checkpoint::new(s.config.encoder.clone(), s.weights.clone(), s.embedding.clone());
    let mut w = create(&files.checkpoint)?;
    write_checkpoint(&checkpoint, &mut w).at(stage)?;
    w.flush().map_err(|e| PipelineError::io(stage, &files.checkpoint, e))?;
    save_json(stage, &files.snapshot, s)?;
    Ok(files)
}
