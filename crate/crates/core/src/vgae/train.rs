use super::encoder_graph::EncoderGraph;
use super::loss::{loss_and_grads, sample_noise};
use super::model::{EncoderConfig, RgcnWeights};
use super::VgaeError;
use crate::graph::NodeId;
use crate::par::Exec;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const INIT_STREAM: u64 = 0;
const HOLDOUT_STREAM: u64 = u64::MAX;
const NEGATIVE_ATTEMPTS_PER_SAMPLE: usize = 100;

/// Per-node latent statistics in μ (inference) mode: `z == mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentEmbedding {
    pub node_ids: Vec<NodeId>,
    pub mu: Array2<f64>,
    pub logvar: Array2<f64>,
    pub z: Array2<f64>,
}

impl LatentEmbedding {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mu.ncols()
    }

    /// Local row of a global node id.
    pub fn row_of(&self, id: NodeId) -> Option<usize> {
        self.node_ids.iter().position(|&n| n == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
    pub beta: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopping,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub stop_reason: StopReason,
    /// Epoch whose weights were emitted.
    pub best_epoch: usize,
    pub param_count: usize,
    pub holdout_auc: Option<f64>,
}

impl TrainReport {
    /// Equality of everything except wall-clock timings.
    pub fn same_trajectory(&self, other: &Self) -> bool {
        self.stop_reason == other.stop_reason
            && self.best_epoch == other.best_epoch
            && self.param_count == other.param_count
            && self.holdout_auc.map(f64::to_bits) == other.holdout_auc.map(f64::to_bits)
            && self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.total.to_bits() == b.total.to_bits()
                    && a.recon.to_bits() == b.recon.to_bits()
                    && a.kl.to_bits() == b.kl.to_bits()
                    && a.beta.to_bits() == b.beta.to_bits()
            })
    }

    pub fn first_loss(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.total)
    }

    pub fn stop_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.total)
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub weights: RgcnWeights,
    pub embedding: LatentEmbedding,
    pub report: TrainReport,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(len: usize, lr: f64) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0, lr }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Column-wise z-scores; constant columns are left untouched.
pub fn standardize_columns(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    let n = x.nrows() as f64;
    if n == 0.0 {
        return out;
    }
    for mut col in out.columns_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        if var > 1e-24 {
            let sd = var.sqrt();
            col.mapv_inplace(|v| (v - mean) / sd);
        }
    }
    out
}

pub(crate) fn epoch_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform node pairs `(min, max)` not in `edges`, sampled with replacement.
pub(crate) fn sample_negatives<R: Rng>(
    n: usize,
    count: usize,
    edges: &HashSet<(usize, usize)>,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(count);
    if n < 2 {
        return out;
    }
    let mut attempts = 0;
    while out.len() < count && attempts < count * NEGATIVE_ATTEMPTS_PER_SAMPLE {
        attempts += 1;
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let pair = (i.min(j), i.max(j));
        if !edges.contains(&pair) {
            out.push(pair);
        }
    }
    out
}

/// Probability that a random positive outscores a random negative (ties count half).
pub fn link_auc(pos_scores: &[f64], neg_scores: &[f64]) -> f64 {
    if pos_scores.is_empty() || neg_scores.is_empty() {
        return 0.5;
    }
    let mut all: Vec<(f64, bool)> =
        pos_scores.iter().map(|&s| (s, true)).chain(neg_scores.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // midranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += mid * all[i..=j].iter().filter(|e| e.1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (pos_scores.len() as f64, neg_scores.len() as f64);
    (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn)
}

pub fn train(graph: &EncoderGraph, features: &Array2<f64>, config: &EncoderConfig) -> Result<Trained, VgaeError> {
    train_with(graph, features, config, Exec::default())
}

pub fn train_with(
    graph: &EncoderGraph,
    features: &Array2<f64>,
    config: &EncoderConfig,
    exec: Exec,
) -> Result<Trained, VgaeError> {
    config.validate(graph.num_relations())?;
    if graph.is_empty() {
        return Err(VgaeError::EmptyGraph);
    }
    let n = graph.len();
    if features.dim() != (n, config.input_dim()) {
        return Err(VgaeError::DimensionMismatch { expected: (n, config.input_dim()), found: features.dim() });
    }
    let all_pos = graph.positive_edges();
    if all_pos.is_empty() {
        return Err(VgaeError::EmptyEdgeSet);
    }
    let edge_set: HashSet<(usize, usize)> = all_pos.iter().copied().collect();

    let (train_graph, train_pos, held_out) = if config.holdout_fraction > 0.0 {
        let mut shuffled = all_pos.clone();
        shuffled.shuffle(&mut epoch_rng(config.seed, HOLDOUT_STREAM));
        let k = ((all_pos.len() as f64) * config.holdout_fraction).round() as usize;
        let held: BTreeSet<(usize, usize)> = shuffled[..k.min(all_pos.len().saturating_sub(1))].iter().copied().collect();
        let g = graph.without_edges(&held);
        let pos = g.positive_edges();
        (g, pos, held.into_iter().collect::<Vec<_>>())
    } else {
        (graph.clone(), all_pos.clone(), Vec::new())
    };

    let mut weights = RgcnWeights::init(config, graph.num_relations(), &mut epoch_rng(config.seed, INIT_STREAM));
    let mut flat = weights.to_flat();
    let mut adam = Adam::new(flat.len(), config.learning_rate);
    let neg_count = (config.neg_ratio * train_pos.len() as f64).round() as usize;

    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut stale = 0usize;
    let mut stop_reason = StopReason::MaxEpochs;
    for epoch in 0..config.max_epochs {
        let started = Instant::now();
        let beta = config.beta(epoch);
        let mut rng = epoch_rng(config.seed, epoch as u64 + 1);
        let negatives = sample_negatives(n, neg_count, &edge_set, &mut rng);
        let eps = sample_noise(n, config.latent_dim(), &mut rng);

        let pass = weights.forward(features, &train_graph, exec)?;
        let (parts, grad_mu, grad_logvar) =
            loss_and_grads(&pass.mu, &pass.logvar, &eps, &train_pos, &negatives, beta)?;
        if !parts.total.is_finite() {
            return Err(VgaeError::NonFiniteLoss { epoch });
        }
        let grads = weights.backward(&pass, &grad_mu, &grad_logvar, &train_graph, exec);
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(VgaeError::NonFiniteLoss { epoch });
        }

        // Losses under different KL weights are not comparable, so patience
        // only runs once the annealing ramp has finished.
        let annealed = beta >= config.beta_end;
        let improved = match &best {
            Some((b, e, _)) if annealed && config.beta(*e) >= config.beta_end => {
                parts.total < b - config.min_improvement
            }
            _ => true,
        };
        if improved {
            best = Some((parts.total, epoch, flat.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        epochs.push(EpochStats {
            epoch,
            total: parts.total,
            recon: parts.recon,
            kl: parts.kl,
            beta,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        if annealed && stale >= config.patience {
            stop_reason = StopReason::EarlyStopping;
            break;
        }
        adam.step(&mut flat, &grads);
        weights.set_flat(&flat);
    }

    let (_, best_epoch, best_flat) = best.expect("max_epochs > 0 checked by caller");
    weights.set_flat(&best_flat);
    let pass = weights.forward(features, &train_graph, exec)?;
    let embedding = LatentEmbedding {
        node_ids: graph.node_ids.clone(),
        z: pass.mu.clone(),
        mu: pass.mu,
        logvar: pass.logvar,
    };

    let holdout_auc = (!held_out.is_empty()).then(|| {
        let mut rng = epoch_rng(config.seed, HOLDOUT_STREAM - 1);
        let negatives = sample_negatives(n, held_out.len(), &edge_set, &mut rng);
        let score = |&(i, j): &(usize, usize)| embedding.mu.row(i).dot(&embedding.mu.row(j));
        link_auc(&held_out.iter().map(score).collect::<Vec<_>>(), &negatives.iter().map(score).collect::<Vec<_>>())
    });

    let report = TrainReport { epochs, stop_reason, best_epoch, param_count: weights.param_count(), holdout_auc };
    Ok(Trained { weights, embedding, report })
}
