use nalgebra::{DMatrix, SymmetricEigen};

use super::NumericsError;

/// Principal axes of a mean-centered data matrix.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k` unit-length axes, ordered by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// Variance captured by each axis.
    pub variances: Vec<f64>,
    /// Trace of the covariance.
    pub total_variance: f64,
}

impl Pca {
    pub fn fit(x: &[Vec<f64>], k: usize) -> Result<Pca, NumericsError> {
        let n = x.len();
        let d = x.first().map_or(0, Vec::len);
        if k == 0 || k > n.min(d) || x.iter().any(|r| r.len() != d) {
            return Err(NumericsError::BadRank { k, n, d });
        }
        let mut mean = vec![0.0; d];
        for r in x {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n as f64;
            }
        }
        let centered = DMatrix::from_fn(n, d, |i, j| x[i][j] - mean[j]);
        let denom = (n.max(2) - 1) as f64;
        let cov = centered.transpose() * &centered / denom;
        let total_variance = cov.trace();
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut components = Vec::with_capacity(k);
        let mut variances = Vec::with_capacity(k);
        for &c in order.iter().take(k) {
            let mut axis: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let pivot = axis
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(1.0);
            if pivot < 0.0 {
                axis.iter_mut().for_each(|v| *v = -*v);
            }
            components.push(axis);
            variances.push(eig.eigenvalues[c].max(0.0));
        }
        Ok(Pca { mean, components, variances, total_variance })
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|r| {
                self.components
                    .iter()
                    .map(|c| c.iter().zip(r).zip(&self.mean).map(|((a, v), m)| a * (v - m)).sum())
                    .collect()
            })
            .collect()
    }

    pub fn reconstruct(&self, z: &[Vec<f64>]) -> Vec<Vec<f64>> {
        z.iter()
            .map(|coords| {
                let mut r = self.mean.clone();
                for (c, &s) in self.components.iter().zip(coords) {
                    for (x, a) in r.iter_mut().zip(c) {
                        *x += s * a;
                    }
                }
                r
            })
            .collect()
    }
}

/// Coordinates of each row on the top `k` principal components.
pub fn pca_project(x: &[Vec<f64>], k: usize) -> Result<Vec<Vec<f64>>, NumericsError> {
    Ok(Pca::fit(x, k)?.transform(x))
}
