//! Central finite-difference check of the hand-written backward pass.

use super::encoder_graph::EncoderGraph;
use super::loss::{loss_and_grads, sample_noise};
use super::model::{EncoderConfig, RgcnWeights};
use super::train::{epoch_rng, sample_negatives};
use super::VgaeError;
use crate::par::Exec;
use ndarray::Array2;
use rand::Rng;
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    pub max_params: usize,
    /// KL weight used for the checked loss.
    pub beta: f64,
    /// Fault injection: multiply the analytic gradient by this factor.
    pub corrupt_scale: Option<f64>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-5, max_params: 20, beta: 0.5, corrupt_scale: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(flat index, analytic, numeric)`
    pub checked: Vec<(usize, f64, f64)>,
}

/// `|a − b| / max(|a|, |b|, 1e-6)`; the floor keeps near-zero gradients from
/// amplifying rounding noise.
fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub fn grad_check(config: &EncoderConfig, graph: &EncoderGraph, features: &Array2<f64>) -> Result<f64, VgaeError> {
    grad_check_with(config, graph, features, &GradCheckOptions::default()).map(|r| r.max_relative_error)
}

pub fn grad_check_with(
    config: &EncoderConfig,
    graph: &EncoderGraph,
    features: &Array2<f64>,
    options: &GradCheckOptions,
) -> Result<GradCheckReport, VgaeError> {
    config.validate(graph.num_relations())?;
    let n = graph.len();
    let weights = RgcnWeights::init(config, graph.num_relations(), &mut epoch_rng(config.seed, 0));
    let pos = graph.positive_edges();
    let edge_set: HashSet<(usize, usize)> = pos.iter().copied().collect();
    let mut rng = epoch_rng(config.seed, 1);
    let neg = sample_negatives(n, pos.len().max(1), &edge_set, &mut rng);
    let eps = sample_noise(n, config.latent_dim(), &mut rng);

    let eval = |w: &RgcnWeights| -> Result<_, VgaeError> {
        let pass = w.forward(features, graph, Exec::Sequential)?;
        let (parts, gm, gl) = loss_and_grads(&pass.mu, &pass.logvar, &eps, &pos, &neg, options.beta)?;
        Ok((parts.total, pass, gm, gl))
    };
    let (_, pass, gm, gl) = eval(&weights)?;
    let mut analytic = weights.backward(&pass, &gm, &gl, graph, Exec::Sequential);
    if let Some(s) = options.corrupt_scale {
        analytic.iter_mut().for_each(|g| *g *= s);
    }

    // Spread the sample across layers, preferring parameters with a live gradient.
    let mut ranges = Vec::new();
    let mut offset = 0;
    for layer in weights.layers() {
        ranges.push(offset..offset + layer.param_count());
        offset += layer.param_count();
    }
    let mut picked: Vec<usize> = Vec::new();
    for k in 0..options.max_params.min(offset) {
        let range = ranges[k % ranges.len()].clone();
        let mut idx = rng.random_range(range.clone());
        for _ in 0..64 {
            if analytic[idx] != 0.0 && !picked.contains(&idx) {
                break;
            }
            idx = rng.random_range(range.clone());
        }
        if !picked.contains(&idx) {
            picked.push(idx);
        }
    }

    let base = weights.to_flat();
    let mut probe = weights.clone();
    let mut checked = Vec::with_capacity(picked.len());
    let mut max_rel: f64 = 0.0;
    for idx in picked {
        let mut shifted = base.clone();
        shifted[idx] = base[idx] + options.step;
        probe.set_flat(&shifted);
        let up = eval(&probe)?.0;
        shifted[idx] = base[idx] - options.step;
        probe.set_flat(&shifted);
        let down = eval(&probe)?.0;
        let numeric = (up - down) / (2.0 * options.step);
        max_rel = max_rel.max(relative_error(analytic[idx], numeric));
        checked.push((idx, analytic[idx], numeric));
    }
    Ok(GradCheckReport { max_relative_error: max_rel, checked })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eight_nodes() -> (EncoderGraph, Array2<f64>) {
        let g = EncoderGraph::from_edges(
            8,
            vec![vec![(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6)], vec![(3, 4), (6, 7), (7, 2)]],
        );
        let x = Array2::from_shape_fn((8, 21), |(i, j)| ((i * 13 + j * 5) as f64 * 0.41).sin());
        (g, x)
    }

    #[test]
    fn linear_heads_only_are_exact() {
        let (g, x) = eight_nodes();
        let config = EncoderConfig { layer_dims: vec![21, 32], seed: 4, ..Default::default() };
        let err = grad_check(&config, &g, &x).unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn full_encoder_matches_finite_differences() {
        let (g, x) = eight_nodes();
        let config = EncoderConfig { seed: 5, ..Default::default() };
        let report = grad_check_with(&config, &g, &x, &GradCheckOptions::default()).unwrap();
        assert_eq!(report.checked.len(), 20);
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let (g, x) = eight_nodes();
        let config = EncoderConfig { seed: 5, ..Default::default() };
        let options = GradCheckOptions { corrupt_scale: Some(1.5), ..Default::default() };
        let report = grad_check_with(&config, &g, &x, &options).unwrap();
        assert!(report.max_relative_error > 1e-2);
    }
}
