use super::{AnalysisError, Embedding2D};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::ArrayView2;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca2 {
    pub embedding: Embedding2D,
    /// Fraction of total variance on each of the two axes.
    pub explained: [f64; 2],
    /// Unit principal axes as rows.
    pub axes: [Vec<f64>; 2],
}

/// Projection onto the two leading covariance eigenvectors, each signed so its
/// largest-magnitude loading is positive.
pub fn pca2(data: ArrayView2<f64>) -> Result<Pca2, AnalysisError> {
    let (n, d) = data.dim();
    if n < 2 {
        return Err(AnalysisError::TooFewPoints { needed: 2, found: n });
    }
    let mean = data.mean_axis(ndarray::Axis(0)).expect("n >= 2");
    let centered = &data - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let total: f64 = cov.diag().sum();
    if total <= 1e-300 {
        return Err(AnalysisError::DegenerateData);
    }
    let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let axis = |k: usize| -> Vec<f64> {
        if k >= d {
            return vec![0.0; d];
        }
        let col: Vec<f64> = eig.eigenvectors.column(order[k]).iter().copied().collect();
        let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        col.into_iter().map(|v| v * sign).collect()
    };
    let axes = [axis(0), axis(1)];
    let explained =
        std::array::from_fn(|k| if k < d { (eig.eigenvalues[order[k]].max(0.0) / total).min(1.0) } else { 0.0 });
    let coords = ndarray::Array2::from_shape_fn((n, 2), |(i, k)| {
        centered.row(i).iter().zip(&axes[k]).map(|(x, a)| x * a).sum()
    });
    Ok(Pca2 { embedding: Embedding2D { coords }, explained, axes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn line_captures_all_variance() {
        let dir: Vec<f64> = (0..32).map(|j| (j as f64 + 1.0).sqrt()).collect();
        let x = Array2::from_shape_fn((20, 32), |(i, j)| 3.0 + i as f64 * dir[j]);
        let p = pca2(x.view()).unwrap();
        assert!((p.explained[0] - 1.0).abs() < 1e-9);
        assert!(p.explained[1].abs() < 1e-9);
    }

    #[test]
    fn isotropic_fractions_close() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_simple_fn((4000, 2), || StandardNormal.sample(&mut rng));
        let p = pca2(x.view()).unwrap();
        assert!(((p.explained[0] - p.explained[1]) / p.explained[1]).abs() < 0.2);
        assert!(p.explained.iter().all(|&f| f >= 0.0) && p.explained.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn mean_projects_to_origin_and_signs_fixed() {
        let x = ndarray::array![[1.0, 2.0, 0.0], [3.0, 1.0, 1.0], [0.0, -1.0, 2.0], [4.0, 6.0, 1.0]];
        let p = pca2(x.view()).unwrap();
        let sums = p.embedding.coords.sum_axis(ndarray::Axis(0));
        assert!(sums.iter().all(|s| s.abs() < 1e-12));
        for a in &p.axes {
            let pivot = a.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(pivot > 0.0);
        }
        // an independent check: the first axis maximizes projected variance over random unit vectors
        let var = |a: &[f64]| {
            let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
            x.rows().into_iter().map(|r| r.iter().zip(a).zip(&mean).map(|((v, w), m)| (v - m) * w).sum::<f64>().powi(2)).sum::<f64>()
        };
        let best = var(&p.axes[0]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let v: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            let u: Vec<f64> = v.iter().map(|t| t / norm).collect();
            assert!(var(&u) <= best + 1e-9);
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(pca2(Array2::from_elem((5, 3), 1.0).view()), Err(AnalysisError::DegenerateData));
        assert!(matches!(pca2(Array2::zeros((1, 3)).view()), Err(AnalysisError::TooFewPoints { .. })));
    }
}
