use super::{AtStage, BuiltCity, ClassifiedCity, IngestSummary, PipelineConfig, PipelineError, Stage, StageError};
use crate::analysis::{ClusterAssignment, ClusterMethod, CorrelationRow, Embedding2D};
use crate::graph::{HetGraph, NodeFeatures, NodeId};
use crate::metapath::{BridgeCategory, BridgeClassification, MetapathProfile};
use crate::vgae::{LatentEmbedding, RgcnWeights, StopReason, TrainReport, Trained};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Umap,
    Pca,
    /// All-zero coordinates: too few bridges or no variance.
    Degenerate,
}

/// Rows align with `bridge_ids`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutput {
    pub bridge_ids: Vec<NodeId>,
    pub projection: Projection,
    pub embedding2d: Embedding2D,
    pub clusters: ClusterAssignment,
    pub pca_explained: Option<[f64; 2]>,
    pub correlations: Vec<CorrelationRow>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageTotals {
    pub shop: usize,
    pub hospital: usize,
    pub residence: usize,
}

impl CoverageTotals {
    pub fn of(profiles: &[MetapathProfile]) -> Self {
        profiles.iter().fold(Self::default(), |t, p| Self {
            shop: t.shop + p.shop_paths,
            hospital: t.hospital + p.hospital_paths,
            residence: t.residence + p.residence_paths,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringMetrics {
    pub method: ClusterMethod,
    pub silhouette: Option<f64>,
    pub n_clusters: usize,
    pub noise_count: usize,
    pub noise_ratio: f64,
    pub min_cluster_size: Option<usize>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    pub epochs: usize,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
    pub first_loss: Option<f64>,
    pub stop_loss: Option<f64>,
    pub holdout_auc: Option<f64>,
    pub param_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub node_count: usize,
    pub bridge_count: usize,
    pub category_counts: BTreeMap<String, usize>,
    pub coverage: CoverageTotals,
    pub highway_metapaths: usize,
    pub clustering: ClusteringMetrics,
    pub projection: Projection,
    pub pca_explained: Option<[f64; 2]>,
    /// Spearman of each latent dimension against highway_count, by |r| descending.
    pub correlations: Vec<CorrelationRow>,
    pub training: TrainingMetrics,
}

/// Metrics as written to disk and served.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub content_hash: String,
    pub created_at: u64,
    #[serde(flatten)]
    pub metrics: Metrics,
}

/// Count per category string, every category present.
pub fn category_counts(classifications: &[BridgeClassification]) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = BridgeCategory::all().iter().map(|c| (c.to_string(), 0)).collect();
    for c in classifications {
        *counts.entry(c.category.to_string()).or_default() += 1;
    }
    counts
}

/// Immutable bundle of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySnapshot {
    pub config: PipelineConfig,
    pub ingest: IngestSummary,
    pub graph: HetGraph,
    pub features: NodeFeatures,
    pub weights: RgcnWeights,
    pub embedding: LatentEmbedding,
    pub train_report: TrainReport,
    pub profiles: Vec<MetapathProfile>,
    pub classifications: Vec<BridgeClassification>,
    pub analysis: AnalysisOutput,
    pub metrics: Metrics,
    /// Hex SHA-256 of the snapshot's canonical JSON without paths, timings and this field.
    pub content_hash: String,
    /// Unix seconds.
    pub created_at: u64,
}

impl CitySnapshot {
    pub fn assemble(
        config: PipelineConfig,
        built: BuiltCity,
        trained: Trained,
        classified: ClassifiedCity,
        analysis: AnalysisOutput,
    ) -> Self {
        let metrics = compute_metrics(&built.graph, &trained.report, &classified, &analysis);
        let created_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut snapshot = Self {
            config,
            ingest: built.ingest,
            graph: built.graph,
            features: built.features,
            weights: trained.weights,
            embedding: trained.embedding,
            train_report: trained.report,
            profiles: classified.profiles,
            classifications: classified.classifications,
            analysis,
            metrics,
            content_hash: String::new(),
            created_at,
        };
        snapshot.content_hash = snapshot.compute_hash();
        snapshot
    }

    pub fn bridge_count(&self) -> usize {
        self.classifications.len()
    }

    pub fn compute_hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("snapshot serializes");
        let root = value.as_object_mut().expect("object");
        root.remove("content_hash");
        root.remove("created_at");
        if let Some(Value::Object(config)) = root.get_mut("config") {
            for key in ["streets", "bridges", "buildings", "output_dir"] {
                config.remove(key);
            }
        }
        if let Some(Value::Array(epochs)) = root.get_mut("train_report").and_then(|r| r.get_mut("epochs")) {
            for e in epochs.iter_mut().filter_map(Value::as_object_mut) {
                e.remove("wall_ms");
            }
        }
        // serde_json maps are ordered by key, so this encoding is canonical
        let bytes = serde_json::to_vec(&value).expect("value serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Row counts agree across graph, profiles, classifications and analysis.
    pub fn is_consistent(&self) -> bool {
        let n = self.graph.bridges().len();
        self.profiles.len() == n
            && self.classifications.len() == n
            && self.analysis.bridge_ids.len() == n
            && self.analysis.embedding2d.len() == n
            && self.analysis.clusters.labels.len() == n
            && self.features.len() == self.graph.node_count()
            && self.embedding.len() == self.embedding.mu.nrows()
    }

    pub fn metrics_document(&self) -> MetricsDocument {
        MetricsDocument { content_hash: self.content_hash.clone(), created_at: self.created_at, metrics: self.metrics.clone() }
    }

    /// Reads a snapshot file and checks its hash and row counts.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let snapshot: Self = super::load_json(Stage::Export, path)?;
        let computed = snapshot.compute_hash();
        if computed != snapshot.content_hash {
            return Err(StageError::HashMismatch { stored: snapshot.content_hash, computed }).at(Stage::Export);
        }
        if !snapshot.is_consistent() {
            return Err(StageError::Invalid("snapshot row counts disagree".into())).at(Stage::Export);
        }
        Ok(snapshot)
    }
}

fn compute_metrics(graph: &HetGraph, report: &TrainReport, classified: &ClassifiedCity, analysis: &AnalysisOutput) -> Metrics {
    let clusters = &analysis.clusters;
    Metrics {
        node_count: graph.node_count(),
        bridge_count: classified.classifications.len(),
        category_counts: category_counts(&classified.classifications),
        coverage: CoverageTotals::of(&classified.profiles),
        highway_metapaths: classified.profiles.iter().map(MetapathProfile::highway_metapaths).sum(),
        clustering: ClusteringMetrics {
            method: clusters.method,
            silhouette: clusters.silhouette,
            n_clusters: clusters.n_clusters,
            noise_count: clusters.noise_count,
            noise_ratio: clusters.noise_ratio(),
            min_cluster_size: clusters.min_cluster_size,
            k: clusters.k,
        },
        projection: analysis.projection,
        pca_explained: analysis.pca_explained,
        correlations: analysis.correlations.clone(),
        training: TrainingMetrics {
            epochs: report.epochs.len(),
            best_epoch: report.best_epoch,
            stop_reason: report.stop_reason,
            first_loss: report.first_loss(),
            stop_loss: report.stop_loss(),
            holdout_auc: report.holdout_auc,
            param_count: report.param_count,
        },
    }
}
