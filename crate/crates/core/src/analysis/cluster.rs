use super::hdbscan::hdbscan_with;
use super::kmeans::kmeans;
use super::{distance_matrix, AnalysisError};
use crate::par::Exec;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub const NOISE: i64 = -1;
/// Below this many points the fallback uses K = 2.
const ADAPTIVE_MIN_POINTS: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    Hdbscan,
    KmeansFallback,
    KmeansAdaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster id per point, `NOISE` for unassigned points.
    pub labels: Vec<i64>,
    pub method: ClusterMethod,
    pub silhouette: Option<f64>,
    pub n_clusters: usize,
    pub noise_count: usize,
    pub min_cluster_size: Option<usize>,
    pub k: Option<usize>,
}

impl ClusterAssignment {
    pub(crate) fn new(labels: Vec<i64>, method: ClusterMethod, min_cluster_size: Option<usize>, k: Option<usize>) -> Self {
        let noise_count = labels.iter().filter(|&&l| l == NOISE).count();
        let n_clusters = labels.iter().copied().filter(|&l| l != NOISE).max().map_or(0, |m| m as usize + 1);
        Self { labels, method, silhouette: None, n_clusters, noise_count, min_cluster_size, k }
    }

    pub fn noise_ratio(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.noise_count as f64 / self.labels.len() as f64
        }
    }
}

/// Relabels clusters `0, 1, ...` in order of their lowest-index member.
pub fn canonical_labels(labels: &[i64]) -> Vec<i64> {
    let mut map: Vec<(i64, i64)> = Vec::new();
    labels
        .iter()
        .map(|&l| {
            if l == NOISE {
                return NOISE;
            }
            match map.iter().find(|(from, _)| *from == l) {
                Some(&(_, to)) => to,
                None => {
                    let to = map.len() as i64;
                    map.push((l, to));
                    to
                }
            }
        })
        .collect()
}

/// `max(5, floor(0.03 n))`.
pub fn min_cluster_size(n: usize) -> usize {
    (n * 3 / 100).max(5)
}

/// K = 2 for small inputs, else `floor(sqrt(n) / 2)`.
pub fn fallback_k(n: usize) -> usize {
    if n < ADAPTIVE_MIN_POINTS {
        2.min(n)
    } else {
        (((n as f64).sqrt() / 2.0).floor() as usize).max(2)
    }
}

/// Mean over non-noise points of `(b − a) / max(a, b)`; singleton clusters score 0.
pub fn silhouette(points: ArrayView2<f64>, labels: &[i64]) -> Result<f64, AnalysisError> {
    silhouette_with(points, labels, Exec::default())
}

pub(crate) fn silhouette_with(points: ArrayView2<f64>, labels: &[i64], exec: Exec) -> Result<f64, AnalysisError> {
    if points.nrows() != labels.len() {
        return Err(AnalysisError::LengthMismatch(points.nrows(), labels.len()));
    }
    let kept: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != NOISE).collect();
    let ids = canonical_labels(&kept.iter().map(|&i| labels[i]).collect::<Vec<_>>());
    let k = ids.iter().copied().max().map_or(0, |m| m as usize + 1);
    if k < 2 {
        return Err(AnalysisError::Undefined);
    }
    let sub = points.select(ndarray::Axis(0), &kept);
    let m = kept.len();
    let dist = distance_matrix(sub.view(), exec);
    let mut sizes = vec![0usize; k];
    for &c in &ids {
        sizes[c as usize] += 1;
    }
    let mut total = 0.0;
    for i in 0..m {
        let own = ids[i] as usize;
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..m {
            sums[ids[j] as usize] += dist[i * m + j];
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k).filter(|&c| c != own).map(|c| sums[c] / sizes[c] as f64).fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / m as f64)
}

pub fn cluster_with_fallback(points: ArrayView2<f64>, seed: u64) -> ClusterAssignment {
    cluster_with_fallback_with(points, seed, Exec::default())
}

/// HDBSCAN with the size rule; k-means when it finds fewer than two clusters.
pub fn cluster_with_fallback_with(points: ArrayView2<f64>, seed: u64, exec: Exec) -> ClusterAssignment {
    let n = points.nrows();
    let mcs = min_cluster_size(n);
    let mut assignment = hdbscan_with(points, mcs, exec);
    if assignment.n_clusters < 2 && n >= 2 {
        let k = fallback_k(n);
        let method = if n < ADAPTIVE_MIN_POINTS { ClusterMethod::KmeansFallback } else { ClusterMethod::KmeansAdaptive };
        let result = kmeans(points, k, seed).expect("k <= n");
        let labels: Vec<i64> = result.labels.iter().map(|&l| l as i64).collect();
        assignment = ClusterAssignment::new(canonical_labels(&labels), method, Some(mcs), Some(k));
    }
    assignment.silhouette = silhouette_with(points, &assignment.labels, exec).ok();
    assignment
}
