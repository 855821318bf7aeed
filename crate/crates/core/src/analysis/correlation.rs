use super::AnalysisError;
use crate::par::{map_indices, Exec};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub dim: usize,
    pub spearman_r: f64,
    pub p_value: f64,
}

/// 1-based ranks; tied values share their average rank.
pub fn rank_average(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Rank correlation with a two-sided p-value from `t = r·sqrt((n−2)/(1−r²))`.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(AnalysisError::TooFewPoints { needed: 3, found: n });
    }
    let r = pearson(&rank_average(xs), &rank_average(ys)).ok_or(AnalysisError::ConstantInput)?;
    let df = (n - 2) as f64;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok((r, p))
}

/// Spearman of every embedding column against `target`, sorted by |r| descending.
/// Constant columns report r = 0, p = 1.
pub fn latent_correlation_scan(embeddings: ArrayView2<f64>, target: &[f64], exec: Exec) -> Result<Vec<CorrelationRow>, AnalysisError> {
    if embeddings.nrows() != target.len() {
        return Err(AnalysisError::LengthMismatch(embeddings.nrows(), target.len()));
    }
    let rows: Vec<Result<CorrelationRow, AnalysisError>> = map_indices(exec, embeddings.ncols(), |dim| {
        let col: Vec<f64> = embeddings.column(dim).to_vec();
        match spearman(&col, target) {
            Ok((r, p)) => Ok(CorrelationRow { dim, spearman_r: r, p_value: p }),
            Err(AnalysisError::ConstantInput) => Ok(CorrelationRow { dim, spearman_r: 0.0, p_value: 1.0 }),
            Err(e) => Err(e),
        }
    });
    let mut rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| b.spearman_r.abs().total_cmp(&a.spearman_r.abs()).then(a.dim.cmp(&b.dim)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// rank_i = 1 + #{x_j < x_i} + (#{x_j == x_i} − 1) / 2
    fn brute_ranks(xs: &[f64]) -> Vec<f64> {
        xs.iter()
            .map(|&x| {
                let less = xs.iter().filter(|&&y| y < x).count() as f64;
                let equal = xs.iter().filter(|&&y| y == x).count() as f64;
                1.0 + less + (equal - 1.0) / 2.0
            })
            .collect()
    }

    fn brute_spearman(xs: &[f64], ys: &[f64]) -> f64 {
        let (rx, ry) = (brute_ranks(xs), brute_ranks(ys));
        let n = xs.len() as f64;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn monotone_and_reversed() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&x, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap(), (1.0, 0.0));
        assert_eq!(spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap().0, -1.0);
    }

    #[test]
    fn tied_example() {
        let xs = [1.0, 2.0, 2.0, 3.0];
        let ys = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(rank_average(&xs), vec![1.0, 2.5, 2.5, 4.0]);
        assert!((spearman(&xs, &ys).unwrap().0 - brute_spearman(&xs, &ys)).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for case in 0..100 {
            let n = rng.random_range(3..60);
            // even cases draw from a tiny alphabet to force ties
            let draw = |rng: &mut ChaCha8Rng| if case % 2 == 0 { rng.random_range(0..4) as f64 } else { rng.random::<f64>() };
            let xs: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
            let ys: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
            match spearman(&xs, &ys) {
                Ok((r, _)) => assert!((r - brute_spearman(&xs, &ys)).abs() < 1e-12),
                Err(e) => assert_eq!(e, AnalysisError::ConstantInput),
            }
        }
    }

    #[test]
    fn p_value_reference() {
        // r = 0.5, n = 10: t = 0.5·sqrt(8/0.75) = 1.63299, two-sided p ≈ 0.1411 (t table, 8 df)
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys = [1.0, 0.0, 3.0, 2.0, 7.0, 9.0, 4.0, 5.0, 6.0, 8.0];
        let (r, p) = spearman(&xs, &ys).unwrap();
        let t = r * (8.0 / (1.0 - r * r)).sqrt();
        assert!(r > 0.0 && p > 0.0 && p < 1.0);
        if (r - 0.5).abs() < 1e-12 {
            assert!((t - 1.63299).abs() < 1e-4);
            assert!((p - 0.1411).abs() < 1e-3);
        }
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(AnalysisError::ConstantInput));
    }

    #[test]
    fn planted_dimension_ranks_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 500;
        let highway: Vec<f64> = (0..n).map(|_| rng.random_range(0..12) as f64).collect();
        let mut emb = Array2::from_shape_simple_fn((n, 32), || rng.random::<f64>());
        for i in 0..n {
            emb[[i, 19]] = highway[i];
        }
        emb.column_mut(3).fill(0.0);
        let rows = latent_correlation_scan(emb.view(), &highway, Exec::Parallel).unwrap();
        assert_eq!(rows.len(), 32);
        assert_eq!((rows[0].dim, rows[0].spearman_r), (19, 1.0));
        assert!(rows[1..].iter().all(|r| r.spearman_r.abs() < 0.2));
        assert!(rows.iter().any(|r| r.dim == 3 && r.spearman_r == 0.0 && r.p_value == 1.0));
        assert_eq!(rows, latent_correlation_scan(emb.view(), &highway, Exec::Sequential).unwrap());
    }

    proptest! {
        #[test]
        fn self_correlation_and_monotone_invariance(xs in proptest::collection::vec(-100.0f64..100.0, 3..40), ys in proptest::collection::vec(-100.0f64..100.0, 40)) {
            let ys = &ys[..xs.len()];
            if let Ok((r, _)) = spearman(&xs, &xs) {
                prop_assert!((r - 1.0).abs() < 1e-12);
            }
            let transformed: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0).collect();
            match (spearman(&xs, ys), spearman(&transformed, ys)) {
                (Ok(a), Ok(b)) => prop_assert!((a.0 - b.0).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }
}
