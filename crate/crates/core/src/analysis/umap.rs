//! UMAP to two dimensions: exact k-NN, smooth-kNN calibration, fuzzy union and
//! a seeded SGD layout with negative sampling.

use super::{sq_dist, AnalysisError, Embedding2D};
use crate::par::{map_indices, Exec};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const BISECTION_ITERS: usize = 64;
const MIN_SIGMA_SCALE: f64 = 1e-3;
const GRAD_CLIP: f64 = 4.0;
const INIT_HALF_WIDTH: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UmapParams {
    /// Neighborhood size, counting the point itself.
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub n_epochs: usize,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for UmapParams {
    fn default() -> Self {
        Self { n_neighbors: 15, min_dist: 0.1, spread: 1.0, n_epochs: 500, negative_sample_rate: 5, learning_rate: 1.0, seed: 0 }
    }
}

fn curve_target(x: f64, min_dist: f64, spread: f64) -> f64 {
    if x < min_dist {
        1.0
    } else {
        (-(x - min_dist) / spread).exp()
    }
}

/// Least-squares fit of `1 / (1 + a x^{2b})` to the offset-exponential
/// membership curve on 300 points in `[0, 3·spread]` (Levenberg–Marquardt).
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| curve_target(x, min_dist, spread)).collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter().zip(&ys).map(|(&x, &y)| (1.0 / (1.0 + a * x.powf(2.0 * b)) - y).powi(2)).sum()
    };
    let (mut a, mut b) = (1.0, 1.0);
    let mut damping = 1e-3;
    let mut cost = sse(a, b);
    for _ in 0..500 {
        // normal equations of the 2-parameter Gauss–Newton step
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x <= 0.0 {
                continue;
            }
            let p = x.powf(2.0 * b);
            let denom = 1.0 + a * p;
            let f = 1.0 / denom;
            let da = -p / (denom * denom);
            let db = -a * p * 2.0 * x.ln() / (denom * denom);
            let r = f - y;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let (maa, mbb) = (jaa * (1.0 + damping), jbb * (1.0 + damping));
        let det = maa * mbb - jab * jab;
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = -(mbb * ga - jab * gb) / det;
        let step_b = -(maa * gb - jab * ga) / det;
        let (na, nb) = (a + step_a, b + step_b);
        let new_cost = if na > 0.0 && nb > 0.0 { sse(na, nb) } else { f64::INFINITY };
        if new_cost < cost {
            let done = (cost - new_cost) < 1e-15 * cost.max(1e-300);
            a = na;
            b = nb;
            cost = new_cost;
            damping = (damping / 10.0).max(1e-12);
            if done {
                break;
            }
        } else {
            damping *= 10.0;
            if damping > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

/// Symmetric fuzzy membership graph as directed `(i, j, w)` entries.
fn fuzzy_graph(data: ArrayView2<f64>, k: usize, exec: Exec) -> Vec<(usize, usize, f64)> {
    let n = data.nrows();
    let target = (k as f64).log2();
    let mean_all: f64 = {
        let total: f64 = (0..n).map(|i| (0..n).map(|j| sq_dist(data.row(i), data.row(j)).sqrt()).sum::<f64>()).sum();
        total / (n * n) as f64
    };
    let rows: Vec<Vec<(usize, f64)>> = map_indices(exec, n, |i| {
        let mut d: Vec<(f64, usize)> =
            (0..n).filter(|&j| j != i).map(|j| (sq_dist(data.row(i), data.row(j)).sqrt(), j)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(k - 1);
        let rho = d.iter().map(|e| e.0).find(|&x| x > 0.0).unwrap_or(0.0);
        let (mut lo, mut hi, mut sigma) = (0.0, f64::INFINITY, 1.0);
        for _ in 0..BISECTION_ITERS {
            let psum: f64 = d.iter().map(|e| (-(e.0 - rho).max(0.0) / sigma).exp()).sum();
            if psum > target {
                hi = sigma;
                sigma = (lo + hi) / 2.0;
            } else {
                lo = sigma;
                sigma = if hi.is_infinite() { sigma * 2.0 } else { (lo + hi) / 2.0 };
            }
        }
        let mean_i = d.iter().map(|e| e.0).sum::<f64>() / d.len().max(1) as f64;
        let floor = MIN_SIGMA_SCALE * if rho > 0.0 { mean_i } else { mean_all };
        let sigma = sigma.max(floor).max(1e-300);
        d.iter().map(|&(dist, j)| (j, (-(dist - rho).max(0.0) / sigma).exp())).collect()
    });
    let mut dense = std::collections::BTreeMap::<(usize, usize), f64>::new();
    for (i, row) in rows.iter().enumerate() {
        for &(j, w) in row {
            dense.insert((i, j), w);
        }
    }
    let mut out = Vec::new();
    for (&(i, j), &w) in &dense {
        let back = dense.get(&(j, i)).copied().unwrap_or(0.0);
        let sym = w + back - w * back;
        out.push((i, j, sym));
        if back == 0.0 {
            out.push((j, i, sym));
        }
    }
    out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    out
}

pub fn umap2(data: ArrayView2<f64>, params: &UmapParams, exec: Exec) -> Result<Embedding2D, AnalysisError> {
    let n = data.nrows();
    if n <= params.n_neighbors || params.n_neighbors < 2 {
        return Err(AnalysisError::TooFewPoints { needed: params.n_neighbors + 1, found: n });
    }
    let (a, b) = fit_ab(params.min_dist, params.spread);
    let mut edges = fuzzy_graph(data, params.n_neighbors, exec);
    let max_w = edges.iter().map(|e| e.2).fold(0.0, f64::max);
    edges.retain(|e| e.2 >= max_w / params.n_epochs as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut emb = Array2::from_shape_simple_fn((n, 2), || rng.random_range(-INIT_HALF_WIDTH..INIT_HALF_WIDTH));
    let epochs_per_sample: Vec<f64> = edges.iter().map(|e| max_w / e.2).collect();
    let neg_rate = params.negative_sample_rate.max(1) as f64;
    let epochs_per_negative: Vec<f64> = epochs_per_sample.iter().map(|e| e / neg_rate).collect();
    let mut next_sample = epochs_per_sample.clone();
    let mut next_negative = epochs_per_negative.clone();
    let clip = |v: f64| v.clamp(-GRAD_CLIP, GRAD_CLIP);

    for epoch in 0..params.n_epochs {
        let alpha = params.learning_rate * (1.0 - epoch as f64 / params.n_epochs as f64);
        let now = epoch as f64;
        for (e, &(i, j, _)) in edges.iter().enumerate() {
            if next_sample[e] > now {
                continue;
            }
            let dx = [emb[[i, 0]] - emb[[j, 0]], emb[[i, 1]] - emb[[j, 1]]];
            let d2 = dx[0] * dx[0] + dx[1] * dx[1];
            if d2 > 0.0 {
                let coeff = -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0);
                for t in 0..2 {
                    let g = clip(coeff * dx[t]) * alpha;
                    emb[[i, t]] += g;
                    emb[[j, t]] -= g;
                }
            }
            next_sample[e] += epochs_per_sample[e];

            let n_neg = ((now - next_negative[e]) / epochs_per_negative[e]).max(0.0) as usize;
            for _ in 0..n_neg {
                let k = rng.random_range(0..n);
                if k == i {
                    continue;
                }
                let dx = [emb[[i, 0]] - emb[[k, 0]], emb[[i, 1]] - emb[[k, 1]]];
                let d2 = dx[0] * dx[0] + dx[1] * dx[1];
                for t in 0..2 {
                    let g = if d2 > 0.0 {
                        let coeff = 2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0));
                        clip(coeff * dx[t])
                    } else {
                        GRAD_CLIP
                    };
                    emb[[i, t]] += g * alpha;
                }
            }
            next_negative[e] += n_neg as f64 * epochs_per_negative[e];
        }
    }
    Ok(Embedding2D { coords: emb })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn curve_parameters_match_grid_search() {
        let (a, b) = fit_ab(0.1, 1.0);
        assert!((a - 1.577).abs() < 0.01 && (b - 0.895).abs() < 0.01, "a={a} b={b}");
        // independent oracle: exhaustive grid on the same objective
        let xs: Vec<f64> = (0..300).map(|i| 3.0 * i as f64 / 299.0).collect();
        let sse = |a: f64, b: f64| {
            xs.iter()
                .map(|&x| {
                    let y = if x < 0.1 { 1.0 } else { (-(x - 0.1)).exp() };
                    (1.0 / (1.0 + a * x.powf(2.0 * b)) - y).powi(2)
                })
                .sum::<f64>()
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for ia in 0..=200 {
            for ib in 0..=200 {
                let (ga, gb) = (1.3 + ia as f64 * 0.003, 0.75 + ib as f64 * 0.0015);
                let s = sse(ga, gb);
                if s < best.0 {
                    best = (s, ga, gb);
                }
            }
        }
        assert!(sse(a, b) <= best.0 + 1e-12);
        assert!((a - best.1).abs() < 0.01 && (b - best.2).abs() < 0.005);
    }

    fn two_blobs() -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        Array2::from_shape_fn((200, 32), |(i, j)| {
            let offset = if i >= 100 && j == 0 { 50.0 } else { 0.0 };
            offset + 0.5 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) / 32f64.sqrt()
        })
    }

    #[test]
    fn separates_far_blobs() {
        let x = two_blobs();
        let e = umap2(x.view(), &UmapParams { seed: 3, ..Default::default() }, Exec::Parallel).unwrap();
        assert_eq!(e.coords.dim(), (200, 2));
        assert!(e.coords.iter().all(|v| v.is_finite()));
        let centroid = |r: std::ops::Range<usize>| {
            let m = r.len() as f64;
            let s = r.clone().fold([0.0, 0.0], |acc, i| [acc[0] + e.coords[[i, 0]], acc[1] + e.coords[[i, 1]]]);
            [s[0] / m, s[1] / m]
        };
        let (c0, c1) = (centroid(0..100), centroid(100..200));
        let between = ((c0[0] - c1[0]).powi(2) + (c0[1] - c1[1]).powi(2)).sqrt();
        let mut intra = 0.0;
        let mut pairs = 0.0;
        for blk in [0..100usize, 100..200] {
            for i in blk.clone() {
                for j in blk.clone().filter(|&j| j > i) {
                    intra += ((e.coords[[i, 0]] - e.coords[[j, 0]]).powi(2) + (e.coords[[i, 1]] - e.coords[[j, 1]]).powi(2)).sqrt();
                    pairs += 1.0;
                }
            }
        }
        assert!(between > 5.0 * intra / pairs, "between {between} intra {}", intra / pairs);
    }

    #[test]
    fn seeded_and_exec_independent() {
        let x = two_blobs();
        let p = UmapParams { seed: 8, n_epochs: 50, ..Default::default() };
        let a = umap2(x.view(), &p, Exec::Sequential).unwrap();
        assert_eq!(a, umap2(x.view(), &p, Exec::Parallel).unwrap());
        assert!(matches!(umap2(x.slice(ndarray::s![..15, ..]), &p, Exec::Sequential), Err(AnalysisError::TooFewPoints { .. })));
    }
}
