use super::encoder_graph::EncoderGraph;
use super::layer::{LayerCache, LayerGrads, RgcnLayer};
use super::VgaeError;
use crate::par::Exec;
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const LOGVAR_MIN: f64 = -20.0;
pub const LOGVAR_MAX: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Input width, hidden widths..., latent width.
    pub layer_dims: Vec<usize>,
    pub num_bases: usize,
    pub learning_rate: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_epochs: usize,
    pub neg_ratio: f64,
    pub patience: usize,
    pub min_improvement: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Hold out this fraction of positive edges for link-prediction AUC (0 disables).
    pub holdout_fraction: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            layer_dims: vec![21, 128, 128, 32],
            num_bases: 2,
            learning_rate: 0.001,
            beta_start: 0.01,
            beta_end: 1.0,
            beta_epochs: 50,
            neg_ratio: 1.0,
            patience: 10,
            min_improvement: 1e-4,
            max_epochs: 200,
            seed: 0,
            holdout_fraction: 0.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self, num_relations: usize) -> Result<(), VgaeError> {
        let bad = |msg: &str| Err(VgaeError::InvalidConfig(msg.to_string()));
        if self.layer_dims.len() < 2 || self.layer_dims.contains(&0) {
            return bad("layer_dims needs at least an input and a latent width, all positive");
        }
        let min_dim = *self.layer_dims.iter().min().expect("non-empty");
        if self.num_bases == 0 || self.num_bases > num_relations.max(1) * min_dim {
            return bad("num_bases must be in 1..=|relations|·min(layer_dims)");
        }
        if !(self.learning_rate > 0.0 && self.beta_start > 0.0 && self.beta_end > 0.0 && self.neg_ratio > 0.0) {
            return bad("rates must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return bad("holdout_fraction must be in [0, 1)");
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn latent_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated")
    }

    /// Linear KL weight ramp from `beta_start` to `beta_end` over `beta_epochs`.
    pub fn beta(&self, epoch: usize) -> f64 {
        if self.beta_epochs == 0 {
            return self.beta_end;
        }
        let t = epoch as f64 / self.beta_epochs as f64;
        (self.beta_start + (self.beta_end - self.beta_start) * t).min(self.beta_end)
    }
}

/// KL weight for `epoch` under the default 0.01 → 1.0 ramp over 50 epochs.
pub fn beta_schedule(epoch: usize) -> f64 {
    EncoderConfig::default().beta(epoch)
}

/// Encoder weights: ReLU hidden layers followed by linear μ and log σ² heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgcnWeights {
    pub hidden: Vec<RgcnLayer>,
    pub mu_head: RgcnLayer,
    pub logvar_head: RgcnLayer,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Post-ReLU hidden states, one per hidden layer.
    pub hidden_states: Vec<Array2<f64>>,
    pub mu: Array2<f64>,
    /// Clamped to `[LOGVAR_MIN, LOGVAR_MAX]`.
    pub logvar: Array2<f64>,
    raw_logvar: Array2<f64>,
    hidden_pre: Vec<Array2<f64>>,
    hidden_caches: Vec<LayerCache>,
    mu_cache: LayerCache,
    logvar_cache: LayerCache,
}

impl RgcnWeights {
    pub fn init<R: Rng>(config: &EncoderConfig, num_relations: usize, rng: &mut R) -> Self {
        let dims = &config.layer_dims;
        let k = dims.len();
        let hidden = (0..k - 2)
            .map(|l| RgcnLayer::init(dims[l], dims[l + 1], num_relations, config.num_bases, rng))
            .collect();
        let mu_head = RgcnLayer::init(dims[k - 2], dims[k - 1], num_relations, config.num_bases, rng);
        let logvar_head = RgcnLayer::init(dims[k - 2], dims[k - 1], num_relations, config.num_bases, rng);
        Self { hidden, mu_head, logvar_head }
    }

    pub fn layers(&self) -> impl Iterator<Item = &RgcnLayer> {
        self.hidden.iter().chain([&self.mu_head, &self.logvar_head])
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(RgcnLayer::param_count).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.first().unwrap_or(&self.mu_head).d_in()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in self.layers() {
            for p in layer.params() {
                out.extend(p.iter());
            }
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        let layers = self.hidden.iter_mut().chain([&mut self.mu_head, &mut self.logvar_head]);
        for layer in layers {
            for p in layer.params_mut() {
                for v in p.iter_mut() {
                    *v = flat[offset];
                    offset += 1;
                }
            }
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    pub fn forward(&self, features: &Array2<f64>, graph: &EncoderGraph, exec: Exec) -> Result<ForwardPass, VgaeError> {
        if features.ncols() != self.input_dim() || features.nrows() != graph.len() {
            return Err(VgaeError::DimensionMismatch {
                expected: (graph.len(), self.input_dim()),
                found: features.dim(),
            });
        }
        let rels = &graph.relations;
        let mut h = features.as_standard_layout().to_owned();
        let mut hidden_states = Vec::new();
        let mut hidden_pre = Vec::new();
        let mut hidden_caches = Vec::new();
        for layer in &self.hidden {
            let (pre, cache) = layer.forward(&h, rels, exec);
            h = pre.mapv(|v| v.max(0.0));
            hidden_pre.push(pre);
            hidden_caches.push(cache);
            hidden_states.push(h.clone());
        }
        let (mu, mu_cache) = self.mu_head.forward(&h, rels, exec);
        let (raw_logvar, logvar_cache) = self.logvar_head.forward(&h, rels, exec);
        let logvar = raw_logvar.mapv(|v| v.clamp(LOGVAR_MIN, LOGVAR_MAX));
        Ok(ForwardPass { hidden_states, mu, logvar, raw_logvar, hidden_pre, hidden_caches, mu_cache, logvar_cache })
    }

    /// Flat parameter gradient given `∂L/∂μ` and `∂L/∂logvar` (post-clamp).
    pub fn backward(
        &self,
        pass: &ForwardPass,
        grad_mu: &Array2<f64>,
        grad_logvar: &Array2<f64>,
        graph: &EncoderGraph,
        exec: Exec,
    ) -> Vec<f64> {
        let rels = &graph.relations;
        let grad_raw = ndarray::Zip::from(grad_logvar)
            .and(&pass.raw_logvar)
            .map_collect(|&g, &raw| if raw > LOGVAR_MIN && raw < LOGVAR_MAX { g } else { 0.0 });
        let (mu_grads, mut grad_h) = self.mu_head.backward(&pass.mu_cache, grad_mu, rels, exec);
        let (lv_grads, grad_h_lv) = self.logvar_head.backward(&pass.logvar_cache, &grad_raw, rels, exec);
        grad_h += &grad_h_lv;
        let mut hidden_grads: Vec<LayerGrads> = Vec::with_capacity(self.hidden.len());
        for l in (0..self.hidden.len()).rev() {
            let grad_pre = ndarray::Zip::from(&grad_h)
                .and(&pass.hidden_pre[l])
                .map_collect(|&g, &pre| if pre > 0.0 { g } else { 0.0 });
            let (grads, grad_in) = self.hidden[l].backward(&pass.hidden_caches[l], &grad_pre, rels, exec);
            hidden_grads.push(grads);
            grad_h = grad_in;
        }
        hidden_grads.reverse();
        let mut flat = Vec::with_capacity(self.param_count());
        for g in hidden_grads.iter().chain([&mu_grads, &lv_grads]) {
            for p in g.params() {
                flat.extend(p.iter());
            }
        }
        flat
    }
}
