//! End-to-end orchestration: ingest → build → train → profile → classify →
//! analyze → export, plus the snapshot, what-if and file formats the CLI and
//! service share.

mod export;
pub mod overpass;
mod snapshot;
mod whatif;

pub use export::{
    bridge_rows, classification_rows, embedding2d_rows, overlay, read_classification_csv, read_overlay,
    write_classification_csv, write_outputs, BridgeRow, ClassificationRow, Embedding2DRow, OutputFiles, OverlayBridge,
    OverlayError, CLASSIFICATION_COLUMNS,
};
pub use snapshot::{
    category_counts, AnalysisOutput, CitySnapshot, ClusteringMetrics, CoverageTotals, Metrics, MetricsDocument,
    Projection, TrainingMetrics,
};
pub use whatif::{rank_budget, whatif, BudgetEntry, CategoryChange, CoverageDelta, WhatIfError, WhatIfRequest, WhatIfResponse};

use crate::analysis::{
    cluster_with_fallback_with, latent_correlation_scan, pca2, umap2, AnalysisError, ClusterAssignment, ClusterMethod,
    Embedding2D, UmapParams,
};
use crate::graph::{
    build_features_with, highway_counts, ingest_bridges, ingest_buildings, ingest_streets, knn_building_edges,
    snap_bridges, BridgeRecord, BuildingRecord, GraphError, HetGraph, IngestReport, KnnParams, NodeFeatures, NodeId,
    PropertyKeys, StreetNetwork, FEATURE_DIM,
};
use crate::metapath::{classify_all, profile, BridgeClassification, ClassifierThresholds, InvalidThresholds, MetapathProfile};
use crate::par::Exec;
use crate::vgae::{standardize_columns, train_with, EncoderConfig, EncoderGraph, Trained, VgaeError};
use ndarray::{Array2, Axis};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

pub const GRAPH_FILE: &str = "graph.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const PROFILES_FILE: &str = "profiles.json";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const CLASSIFICATION_FILE: &str = "classification.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const OVERLAY_FILE: &str = "overlay.geojson";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub streets: PathBuf,
    pub bridges: PathBuf,
    pub buildings: PathBuf,
    pub output_dir: PathBuf,
    pub keys: PropertyKeys,
    pub k_shop: usize,
    pub k_hospital: usize,
    pub k_residence: usize,
    pub radius_m: f64,
    pub thresholds: ClassifierThresholds,
    pub encoder: EncoderConfig,
    pub clustering_seed: u64,
    pub umap: UmapParams,
    /// Z-score feature columns before training.
    pub standardize_features: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let knn = KnnParams::default();
        Self {
            streets: "streets.geojson".into(),
            bridges: "bridges.geojson".into(),
            buildings: "buildings.geojson".into(),
            output_dir: "out".into(),
            keys: PropertyKeys::default(),
            k_shop: knn.k_shop,
            k_hospital: knn.k_hospital,
            k_residence: knn.k_residence,
            radius_m: knn.radius_m,
            thresholds: ClassifierThresholds::default(),
            encoder: EncoderConfig::default(),
            clustering_seed: 0,
            umap: UmapParams::default(),
            standardize_features: true,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let config: Self = toml::from_str(text).map_err(|e| PipelineError::new(Stage::Config, e))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a TOML config; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(Stage::Config, path, e))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            for p in [&mut config.streets, &mut config.bridges, &mut config.buildings, &mut config.output_dir] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// One seed for training, UMAP and k-means.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.encoder.seed = seed;
        self.umap.seed = seed;
        self.clustering_seed = seed;
        self
    }

    pub fn knn(&self) -> KnnParams {
        KnnParams { k_shop: self.k_shop, k_hospital: self.k_hospital, k_residence: self.k_residence, radius_m: self.radius_m }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |msg: String| Err(PipelineError::new(Stage::Config, StageError::Invalid(msg)));
        for (name, k) in [("k_shop", self.k_shop), ("k_hospital", self.k_hospital), ("k_residence", self.k_residence)] {
            if k == 0 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        if !(self.radius_m.is_finite() && self.radius_m > 0.0) {
            return fail(format!("radius_m must be positive, got {}", self.radius_m));
        }
        if self.encoder.input_dim() != FEATURE_DIM {
            return fail(format!("encoder input width must be {FEATURE_DIM}, got {}", self.encoder.input_dim()));
        }
        if self.umap.n_neighbors < 2 || self.umap.n_epochs == 0 {
            return fail("umap needs n_neighbors >= 2 and n_epochs >= 1".into());
        }
        self.thresholds.validate().map_err(|e| PipelineError::new(Stage::Config, e))?;
        self.encoder.validate(2).map_err(|e| PipelineError::new(Stage::Config, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    Build,
    Train,
    Profile,
    Classify,
    Analyze,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Build => "build",
            Stage::Train => "train",
            Stage::Profile => "profile",
            Stage::Classify => "classify",
            Stage::Analyze => "analyze",
            Stage::Export => "export",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Vgae(#[from] VgaeError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Thresholds(#[from] InvalidThresholds),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error("snapshot hash mismatch: stored {stored}, recomputed {computed}")]
    HashMismatch { stored: String, computed: String },
    #[error("{0}")]
    Invalid(String),
}

/// A stage failure, tagged with the stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl PipelineError {
    pub fn new(stage: Stage, source: impl Into<StageError>) -> Self {
        Self { stage, source: source.into() }
    }

    pub fn io(stage: Stage, path: &Path, source: std::io::Error) -> Self {
        Self { stage, source: StageError::Io { path: path.to_path_buf(), source } }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<StageError>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}

pub fn save_json<T: Serialize>(stage: Stage, path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string(value).at(stage)?;
    std::fs::write(path, text).map_err(|e| PipelineError::io(stage, path, e))
}

pub fn load_json<T: DeserializeOwned>(stage: Stage, path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(stage, path, e))?;
    serde_json::from_str(&text).at(stage)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub streets: IngestReport,
    pub bridges: IngestReport,
    pub buildings: IngestReport,
}

#[derive(Debug, Clone)]
pub struct CityInputs {
    pub streets: StreetNetwork,
    pub bridges: Vec<BridgeRecord>,
    pub buildings: Vec<BuildingRecord>,
    pub summary: IngestSummary,
}

/// Graph with k-NN edges, highway counts and raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltCity {
    pub graph: HetGraph,
    pub features: NodeFeatures,
    pub ingest: IngestSummary,
}

/// Bridge profiles and their classifications, in bridge id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedCity {
    pub profiles: Vec<MetapathProfile>,
    pub classifications: Vec<BridgeClassification>,
}

pub fn ingest(config: &PipelineConfig) -> Result<CityInputs, PipelineError> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| PipelineError::io(Stage::Ingest, p, e));
    ingest_sources(&read(&config.streets)?, &read(&config.bridges)?, &read(&config.buildings)?, config)
}

/// Ingest from in-memory GeoJSON documents.
pub fn ingest_sources(streets: &str, bridges: &str, buildings: &str, config: &PipelineConfig) -> Result<CityInputs, PipelineError> {
    let streets = ingest_streets(streets, &config.keys).at(Stage::Ingest)?;
    let (bridges, bridge_report) = ingest_bridges(bridges, &config.keys).at(Stage::Ingest)?;
    let (buildings, building_report) = ingest_buildings(buildings, &bridges, &config.keys, config.radius_m).at(Stage::Ingest)?;
    let summary = IngestSummary { streets: streets.report.clone(), bridges: bridge_report, buildings: building_report };
    Ok(CityInputs { streets, bridges, buildings, summary })
}

pub fn build(inputs: &CityInputs, config: &PipelineConfig, exec: Exec) -> Result<BuiltCity, PipelineError> {
    let mut graph = HetGraph::assemble(&inputs.streets, &inputs.bridges, &inputs.buildings);
    snap_bridges(&mut graph).at(Stage::Build)?;
    knn_building_edges(&mut graph, &config.knn(), exec);
    highway_counts(&mut graph, exec);
    let features = build_features_with(&graph, exec);
    Ok(BuiltCity { graph, features, ingest: inputs.summary.clone() })
}

/// Encoder subgraph and its (optionally standardized) feature rows.
pub fn encoder_inputs(built: &BuiltCity, config: &PipelineConfig) -> (EncoderGraph, Array2<f64>) {
    let graph = EncoderGraph::from_het_graph(&built.graph);
    let x = built.features.data.select(Axis(0), &graph.node_ids);
    let x = if config.standardize_features { standardize_columns(&x) } else { x };
    (graph, x)
}

pub fn train_encoder(built: &BuiltCity, config: &PipelineConfig, exec: Exec) -> Result<Trained, PipelineError> {
    let (graph, x) = encoder_inputs(built, config);
    train_with(&graph, &x, &config.encoder, exec).at(Stage::Train)
}

pub fn classify_city(graph: &HetGraph, thresholds: &ClassifierThresholds) -> Result<ClassifiedCity, PipelineError> {
    thresholds.validate().at(Stage::Classify)?;
    let profiles = profile(graph);
    let classifications = classify_all(&profiles, thresholds);
    Ok(ClassifiedCity { profiles, classifications })
}

/// μ rows of the bridges, in bridge id order.
pub fn bridge_latents(graph: &HetGraph, embedding: &crate::vgae::LatentEmbedding) -> Result<Array2<f64>, PipelineError> {
    let row: HashMap<NodeId, usize> = embedding.node_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let rows = graph
        .bridges()
        .iter()
        .map(|b| row.get(b).copied().ok_or_else(|| StageError::Invalid(format!("bridge {b} has no embedding row"))))
        .collect::<Result<Vec<_>, _>>()
        .at(Stage::Analyze)?;
    Ok(embedding.mu.select(Axis(0), &rows))
}

/// 2D projection, clustering and latent correlation over bridge embeddings.
/// UMAP needs more bridges than `n_neighbors`; smaller cities use PCA.
pub fn analyze(
    graph: &HetGraph,
    embedding: &crate::vgae::LatentEmbedding,
    config: &PipelineConfig,
    exec: Exec,
) -> Result<AnalysisOutput, PipelineError> {
    let bridge_ids = graph.bridges();
    let mu = bridge_latents(graph, embedding)?;
    let n = bridge_ids.len();

    let pca = pca2(mu.view()).ok();
    let umap = if n > config.umap.n_neighbors { umap2(mu.view(), &config.umap, exec).ok() } else { None };
    let (projection, embedding2d) = match (umap, &pca) {
        (Some(e), _) => (Projection::Umap, e),
        (None, Some(p)) => (Projection::Pca, p.embedding.clone()),
        (None, None) => (Projection::Degenerate, Embedding2D { coords: Array2::zeros((n, 2)) }),
    };

    let clusters = if n == 0 {
        ClusterAssignment::new(Vec::new(), ClusterMethod::Hdbscan, None, None)
    } else {
        cluster_with_fallback_with(embedding2d.coords.view(), config.clustering_seed, exec)
    };

    let highway: Vec<f64> = bridge_ids.iter().map(|&b| graph.node(b).highway_count as f64).collect();
    let correlations = if n >= 3 { latent_correlation_scan(mu.view(), &highway, exec).at(Stage::Analyze)? } else { Vec::new() };

    Ok(AnalysisOutput { bridge_ids, projection, embedding2d, clusters, pca_explained: pca.map(|p| p.explained), correlations })
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<CitySnapshot, PipelineError> {
    run_pipeline_with(config, Exec::default())
}

/// All stages in order; writes every output file into `config.output_dir`.
pub fn run_pipeline_with(config: &PipelineConfig, exec: Exec) -> Result<CitySnapshot, PipelineError> {
    let snapshot = compute_snapshot(config, exec)?;
    write_outputs(&snapshot, &config.output_dir)?;
    Ok(snapshot)
}

/// All stages without touching the output directory.
pub fn compute_snapshot(config: &PipelineConfig, exec: Exec) -> Result<CitySnapshot, PipelineError> {
    config.validate()?;
    let inputs = ingest(config)?;
    let built = build(&inputs, config, exec)?;
    let trained = train_encoder(&built, config, exec)?;
    let classified = classify_city(&built.graph, &config.thresholds)?;
    let analysis = analyze(&built.graph, &trained.embedding, config, exec)?;
    Ok(CitySnapshot::assemble(config.clone(), built, trained, classified, analysis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{SyntheticCity, SyntheticParams};

    #[test]
    fn config_toml_round_trip_and_rejections() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml(&c.to_toml()).unwrap(), c);
        let partial = PipelineConfig::from_toml("k_shop = 3\n[encoder]\nmax_epochs = 5\n").unwrap();
        assert_eq!((partial.k_shop, partial.k_residence, partial.encoder.max_epochs), (3, 20, 5));
        let err = PipelineConfig::from_toml("k_shoop = 3\n").unwrap_err();
        assert_eq!(err.stage, Stage::Config);
        assert!(PipelineConfig::from_toml("k_hospital = 0\n").is_err());
        assert!(PipelineConfig::from_toml("radius_m = 0.0\n").is_err());
        assert!(PipelineConfig::from_toml("[thresholds]\nbalanced_max = 0.95\n").is_err());
    }

    #[test]
    fn load_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("city.toml");
        std::fs::write(&path, "streets = \"data/s.geojson\"\noutput_dir = \"/abs/out\"\n").unwrap();
        let c = PipelineConfig::load(&path).unwrap();
        assert_eq!(c.streets, dir.path().join("data/s.geojson"));
        assert_eq!(c.output_dir, PathBuf::from("/abs/out"));
    }

    #[test]
    fn missing_input_names_ingest_stage() {
        let dir = tempfile::tempdir().unwrap();
        let files = SyntheticCity::generate(&SyntheticParams::default()).write_to(dir.path()).unwrap();
        let config = PipelineConfig {
            streets: files.streets,
            bridges: dir.path().join("missing.geojson"),
            buildings: files.buildings,
            ..Default::default()
        };
        let err = ingest(&config).unwrap_err();
        assert_eq!(err.stage, Stage::Ingest);
        assert!(err.to_string().starts_with("ingest stage failed"));
        assert!(err.to_string().contains("missing.geojson"));
    }

    #[test]
    fn small_city_falls_back_to_pca() {
        let city = SyntheticCity::generate(&SyntheticParams { bridges: 8, grid: 5, residences: 40, shops: 20, hospitals: 3, ..Default::default() });
        let mut config = PipelineConfig::default();
        config.encoder.max_epochs = 3;
        let inputs = ingest_sources(&city.streets, &city.bridges, &city.buildings, &config).unwrap();
        let built = build(&inputs, &config, Exec::Sequential).unwrap();
        let trained = train_encoder(&built, &config, Exec::Sequential).unwrap();
        let a = analyze(&built.graph, &trained.embedding, &config, Exec::Sequential).unwrap();
        assert_eq!(a.projection, Projection::Pca);
        assert_eq!((a.embedding2d.len(), a.clusters.labels.len(), a.correlations.len()), (8, 8, 32));
    }
}
