//! Dimensionality reduction, clustering and latent-dimension correlation over
//! bridge embeddings.

mod cluster;
mod correlation;
mod hdbscan;
mod kmeans;
mod pca;
mod umap;

pub use cluster::{
    canonical_labels, cluster_with_fallback, cluster_with_fallback_with, fallback_k, min_cluster_size, silhouette,
    ClusterAssignment, ClusterMethod, NOISE,
};
pub use correlation::{latent_correlation_scan, rank_average, spearman, CorrelationRow};
pub use hdbscan::{hdbscan, hdbscan_with};
pub use kmeans::{kmeans, KMeansResult};
pub use pca::{pca2, Pca2};
pub use umap::{fit_ab, umap2, UmapParams};

use crate::par::{map_indices, Exec};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("data has zero variance")]
    DegenerateData,
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("k = {k} exceeds n = {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("silhouette undefined with fewer than two clusters")]
    Undefined,
    #[error("constant input has no rank correlation")]
    ConstantInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// One `(u, v)` row per bridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub coords: Array2<f64>,
}

impl Embedding2D {
    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        [self.coords[[i, 0]], self.coords[[i, 1]]]
    }
}

pub(crate) fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dense Euclidean distance matrix, row-major `n × n`.
pub(crate) fn distance_matrix(points: ArrayView2<f64>, exec: Exec) -> Vec<f64> {
    let n = points.nrows();
    map_indices(exec, n, |i| (0..n).map(|j| sq_dist(points.row(i), points.row(j)).sqrt()).collect::<Vec<f64>>())
        .into_iter()
        .flatten()
        .collect()
}
