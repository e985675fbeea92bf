use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::matrix::FeatureMatrix;
use super::FeatureError;

// standard deviations below this are treated as constant features
const ZERO_VARIANCE: f64 = 1e-12;

/// Principal directions of standardized features.
///
/// Features with zero variance in the fit data are dropped (`dropped`), and
/// the remaining ones are standardized with the fit mean and sample
/// standard deviation before projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Indices (into `feature_names`) of retained features.
    pub retained: Vec<usize>,
    pub dropped: Vec<String>,
    /// `k` rows, each of length `retained.len()`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    /// Sum of variances of the standardized retained features.
    pub total_variance: f64,
}

pub fn pca_fit(x: &FeatureMatrix, k: usize) -> Result<PcaModel, FeatureError> {
    pca_fit_rows(x.rows(), x.feature_names(), k)
}

pub fn pca_fit_rows(rows: &[Vec<f64>], names: &[String], k: usize) -> Result<PcaModel, FeatureError> {
    let n = rows.len();
    let d = names.len();
    if n < 2 {
        return Err(FeatureError::RankDeficient {
            requested: k,
            available: 0,
        });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(FeatureError::DimensionMismatch {
            expected: d,
            found: r.len(),
        });
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let mut scale = vec![0.0; d];
    for r in rows {
        for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
            *s += (v - m).powi(2) / (n - 1) as f64;
        }
    }
    scale.iter_mut().for_each(|s| *s = s.sqrt());
    let retained: Vec<usize> = (0..d)
        .filter(|&j| scale[j] > ZERO_VARIANCE * mean[j].abs().max(1.0))
        .collect();
    let dropped = (0..d).filter(|j| !retained.contains(j)).map(|j| names[j].clone()).collect();
    let p = retained.len();
    let available = (n - 1).min(p);
    if k == 0 || k > available {
        return Err(FeatureError::RankDeficient { requested: k, available });
    }

    let z = DMatrix::from_fn(n, p, |i, c| {
        let j = retained[c];
        (rows[i][j] - mean[j]) / scale[j]
    });
    let cov = (z.transpose() * &z) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        // deterministic sign: largest-magnitude entry positive
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map_or(0, |(i, _)| i);
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        components.push(v);
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(PcaModel {
        feature_names: names.to_vec(),
        mean,
        scale,
        retained,
        dropped,
        components,
        explained_variance,
        total_variance: p as f64,
    })
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Standardized retained coordinates of a full feature vector.
    pub fn standardize(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if x.len() != self.feature_names.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: self.feature_names.len(),
                found: x.len(),
            });
        }
        Ok(self.retained.iter().map(|&j| (x[j] - self.mean[j]) / self.scale[j]).collect())
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        let z = self.standardize(x)?;
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Map a projection back to standardized retained coordinates.
    pub fn reconstruct(&self, scores: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if scores.len() != self.k() {
            return Err(FeatureError::DimensionMismatch {
                expected: self.k(),
                found: scores.len(),
            });
        }
        let mut z = vec![0.0; self.retained.len()];
        for (c, s) in self.components.iter().zip(scores) {
            for (zi, ci) in z.iter_mut().zip(c) {
                *zi += s * ci;
            }
        }
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn line_y_equals_x() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let m = pca_fit_rows(&rows, &names(2), 1).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.components[0][0] - s).abs() < 1e-12);
        assert!((m.components[0][1] - s).abs() < 1e-12);
        let full = pca_fit_rows(&rows, &names(2), 2).unwrap();
        assert!(full.explained_variance[1].abs() < 1e-12);
        assert!((full.explained_variance[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_and_dimension_errors() {
        let rows = vec![vec![1.0, 2.0, 5.0], vec![2.0, 1.0, 5.0], vec![0.0, 0.0, 5.0]];
        let m = pca_fit_rows(&rows, &names(3), 2).unwrap();
        assert_eq!(m.dropped, vec!["f2".to_string()]);
        assert!(matches!(
            pca_fit_rows(&rows, &names(3), 3),
            Err(FeatureError::RankDeficient { requested: 3, available: 2 })
        ));
        assert!(matches!(m.project(&[1.0]), Err(FeatureError::DimensionMismatch { .. })));
        let zero = m.project(&m.mean).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn isotropic_sample_has_flat_spectrum() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // Box–Muller normal draws
        let mut normal = || {
            let (u, v): (f64, f64) = (rng.random_range(1e-12..1.0), rng.random_range(0.0..1.0));
            (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
        };
        let rows: Vec<Vec<f64>> = (0..4000).map(|_| (0..4).map(|_| normal()).collect()).collect();
        let m = pca_fit_rows(&rows, &names(4), 4).unwrap();
        let ratio = m.explained_variance[0] / m.explained_variance[3];
        // sampling spread of eigenvalues is ~ 2·sqrt(d/n) ≈ 0.06 each side
        assert!(ratio < 1.25, "ratio {ratio}");
    }

    #[test]
    fn full_rank_reconstruction() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), (t * 0.7).cos() * 3.0, t * t * 0.1, (t * 1.3).sin() + t]
            })
            .collect();
        let m = pca_fit_rows(&rows, &names(4), 4).unwrap();
        for r in &rows {
            let z = m.standardize(r).unwrap();
            let back = m.reconstruct(&m.project(r).unwrap()).unwrap();
            for (a, b) in z.iter().zip(&back) {
                assert!((a - b).abs() < 1e-6);
            }
        }
        for (i, a) in m.components.iter().enumerate() {
            for (j, b) in m.components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() <= 1e-8);
            }
        }
        assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        assert!(m.explained_variance.iter().sum::<f64>() <= m.total_variance + 1e-6);
    }
}
