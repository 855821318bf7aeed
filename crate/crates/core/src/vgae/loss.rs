//! Inner-product decoder, reparameterization and the β-weighted VAE loss.

use super::model::{LOGVAR_MAX, LOGVAR_MIN};
use super::VgaeError;
use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Edge probability `σ(z_i · z_j)`.
pub fn decode_edge(z_i: ArrayView1<f64>, z_j: ArrayView1<f64>) -> f64 {
    sigmoid(z_i.dot(&z_j))
}

/// Standard-normal noise with the shape of `like`.
pub fn sample_noise<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// `z = μ + exp(logvar / 2) ⊙ ε`, with logvar clamped to `[-20, 20]`.
pub fn reparameterize_with(mu: &Array2<f64>, logvar: &Array2<f64>, eps: &Array2<f64>) -> Array2<f64> {
    ndarray::Zip::from(mu)
        .and(logvar)
        .and(eps)
        .map_collect(|&m, &lv, &e| m + (0.5 * lv.clamp(LOGVAR_MIN, LOGVAR_MAX)).exp() * e)
}

pub fn reparameterize(mu: &Array2<f64>, logvar: &Array2<f64>, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = sample_noise(mu.nrows(), mu.ncols(), &mut rng);
    reparameterize_with(mu, logvar, &eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Mean binary cross-entropy over positive (label 1) and negative (label 0)
/// pairs plus `beta` times the node-averaged KL to the standard normal.
pub fn loss(
    z: &Array2<f64>,
    mu: &Array2<f64>,
    logvar: &Array2<f64>,
    pos_edges: &[(usize, usize)],
    neg_edges: &[(usize, usize)],
    beta: f64,
) -> Result<LossParts, VgaeError> {
    let pairs = pos_edges.len() + neg_edges.len();
    if pairs == 0 {
        return Err(VgaeError::EmptyEdgeSet);
    }
    let logit = |&(i, j): &(usize, usize)| z.row(i).dot(&z.row(j));
    let recon = (pos_edges.iter().map(|e| softplus(-logit(e))).sum::<f64>()
        + neg_edges.iter().map(|e| softplus(logit(e))).sum::<f64>())
        / pairs as f64;
    let kl = kl_divergence(mu, logvar);
    Ok(LossParts { total: recon + beta * kl, recon, kl })
}

/// `mean_i ½ Σ_d (exp(logvar) + μ² − 1 − logvar)`.
pub fn kl_divergence(mu: &Array2<f64>, logvar: &Array2<f64>) -> f64 {
    let n = mu.nrows().max(1) as f64;
    ndarray::Zip::from(mu).and(logvar).fold(0.0, |acc, &m, &lv| acc + 0.5 * (lv.exp() + m * m - 1.0 - lv)) / n
}

/// Loss and its gradients with respect to μ and (clamped) logvar for fixed noise.
pub(crate) fn loss_and_grads(
    mu: &Array2<f64>,
    logvar: &Array2<f64>,
    eps: &Array2<f64>,
    pos_edges: &[(usize, usize)],
    neg_edges: &[(usize, usize)],
    beta: f64,
) -> Result<(LossParts, Array2<f64>, Array2<f64>), VgaeError> {
    let z = reparameterize_with(mu, logvar, eps);
    let parts = loss(&z, mu, logvar, pos_edges, neg_edges, beta)?;
    let pairs = (pos_edges.len() + neg_edges.len()) as f64;
    let mut grad_z = Array2::<f64>::zeros(z.raw_dim());
    for (edges, label) in [(pos_edges, 1.0), (neg_edges, 0.0)] {
        for &(i, j) in edges {
            let g = (sigmoid(z.row(i).dot(&z.row(j))) - label) / pairs;
            let zj = z.row(j).to_owned();
            let zi = z.row(i).to_owned();
            grad_z.row_mut(i).scaled_add(g, &zj);
            grad_z.row_mut(j).scaled_add(g, &zi);
        }
    }
    let n = mu.nrows().max(1) as f64;
    let grad_mu = &grad_z + &(mu * (beta / n));
    let grad_logvar = ndarray::Zip::from(&grad_z)
        .and(logvar)
        .and(eps)
        .map_collect(|&gz, &lv, &e| gz * e * 0.5 * (0.5 * lv).exp() + beta * 0.5 * (lv.exp() - 1.0) / n);
    Ok((parts, grad_mu, grad_logvar))
}
