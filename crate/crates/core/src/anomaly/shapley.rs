use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::IsolationForestModel;
use super::AnomalyError;

pub const MAX_EXACT_FEATURES: usize = 12;

/// Shapley decomposition of one score: `score ≈ base_value + Σ values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub feature_names: Vec<String>,
    pub values: Vec<f64>,
    /// Per-feature standard errors; zero for exact enumeration.
    pub standard_errors: Vec<f64>,
    pub base_value: f64,
    pub score: f64,
    pub n_permutations: usize,
    pub seed: u64,
}

impl AttributionVector {
    pub fn efficiency_gap(&self) -> f64 {
        self.score - self.base_value - self.values.iter().sum::<f64>()
    }

    /// Feature indices by decreasing `|value|`, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].abs().total_cmp(&self.values[a].abs()).then(a.cmp(&b)));
        idx
    }

    /// `feature_name,shapley_value,rank` with rank 1 = largest magnitude.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature_name,shapley_value,rank\n");
        for (rank, i) in self.ranking().into_iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.feature_names[i], self.values[i], rank + 1));
        }
        out
    }

    /// Whether this window is labeled student-like at `threshold`.
    pub fn is_anomalous(&self, threshold: f64) -> bool {
        self.score >= threshold
    }
}

fn check_background(x: &[f64], background: &[Vec<f64>]) -> Result<(), AnomalyError> {
    if background.is_empty() {
        return Err(AnomalyError::EmptyBackground);
    }
    if let Some(b) = background.iter().find(|b| b.len() != x.len()) {
        return Err(AnomalyError::DimensionMismatch {
            expected: x.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// Permutation-sampling Shapley values of `f` at `x`.
///
/// Each permutation draws one background row uniformly, then switches
/// features to `x` in permutation order, crediting each feature with the
/// change in `f`. `base_value` is the mean of `f` over all background rows.
pub fn permutation_shapley<F>(
    f: F,
    x: &[f64],
    background: &[Vec<f64>],
    feature_names: &[String],
    n_permutations: usize,
    seed: u64,
) -> Result<AttributionVector, AnomalyError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_background(x, background)?;
    if n_permutations == 0 {
        return Err(AnomalyError::InvalidParameter("n_permutations must be positive".into()));
    }
    let d = x.len();
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..n_permutations).map(|_| master.random()).collect();
    let samples: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut z = background[rng.random_range(0..background.len())].clone();
            let mut order: Vec<usize> = (0..d).collect();
            // Fisher–Yates
            for i in (1..d).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let mut contrib = vec![0.0; d];
            let mut prev = f(&z);
            for &j in &order {
                z[j] = x[j];
                let v = f(&z);
                contrib[j] = v - prev;
                prev = v;
            }
            contrib
        })
        .collect();
    let n = n_permutations as f64;
    let values: Vec<f64> = (0..d).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n).collect();
    let standard_errors = (0..d)
        .map(|j| {
            if n_permutations < 2 {
                return f64::INFINITY;
            }
            let var = samples.iter().map(|s| (s[j] - values[j]).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    let base_value = background.par_iter().map(|b| f(b)).sum::<f64>() / background.len() as f64;
    Ok(AttributionVector {
        feature_names: feature_names.to_vec(),
        values,
        standard_errors,
        base_value,
        score: f(x),
        n_permutations,
        seed,
    })
}

/// Isolation-forest score attribution against background windows.
pub fn shapley_attribution(
    model: &IsolationForestModel,
    x: &[f64],
    background: &[Vec<f64>],
    n_permutations: usize,
    seed: u64,
) -> Result<AttributionVector, AnomalyError> {
    if x.len() != model.dims() {
        return Err(AnomalyError::DimensionMismatch {
            expected: model.dims(),
            found: x.len(),
        });
    }
    permutation_shapley(
        |z| model.score(z).expect("dimensions checked"),
        x,
        background,
        &model.feature_names,
        n_permutations,
        seed,
    )
}

/// Exact Shapley values by enumerating all `2^d` coalitions, with
/// `v(S) = mean over background rows of f(x_S, b_{−S})`.
pub fn exact_shapley<F>(f: F, x: &[f64], background: &[Vec<f64>], feature_names: &[String]) -> Result<AttributionVector, AnomalyError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = x.len();
    if d > MAX_EXACT_FEATURES {
        return Err(AnomalyError::TooManyFeatures(d));
    }
    check_background(x, background)?;
    let value = |mask: usize| -> f64 {
        background
            .iter()
            .map(|b| {
                let z: Vec<f64> = (0..d).map(|j| if mask >> j & 1 == 1 { x[j] } else { b[j] }).collect();
                f(&z)
            })
            .sum::<f64>()
            / background.len() as f64
    };
    let v: Vec<f64> = (0..1usize << d).into_par_iter().map(value).collect();
    // weight(s) = s! (d − s − 1)! / d!
    let mut fact = vec![1.0f64; d + 1];
    for i in 1..=d {
        fact[i] = fact[i - 1] * i as f64;
    }
    let values = (0..d)
        .map(|j| {
            let mut phi = 0.0;
            for mask in 0..1usize << d {
                if mask >> j & 1 == 1 {
                    continue;
                }
                let s = mask.count_ones() as usize;
                phi += fact[s] * fact[d - s - 1] / fact[d] * (v[mask | 1 << j] - v[mask]);
            }
            phi
        })
        .collect();
    Ok(AttributionVector {
        feature_names: feature_names.to_vec(),
        values,
        standard_errors: vec![0.0; d],
        base_value: v[0],
        score: v[(1 << d) - 1],
        n_permutations: 0,
        seed: 0,
    })
}

/// [`exact_shapley`] with absent features replaced by the background mean.
pub fn exact_shapley_mean<F>(f: F, x: &[f64], background: &[Vec<f64>], feature_names: &[String]) -> Result<AttributionVector, AnomalyError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_background(x, background)?;
    let n = background.len() as f64;
    let mean: Vec<f64> = (0..x.len()).map(|j| background.iter().map(|b| b[j]).sum::<f64>() / n).collect();
    exact_shapley(f, x, &[mean], feature_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn single_feature_exact() {
        let f = |z: &[f64]| z[0] * z[0];
        let a = exact_shapley(f, &[3.0], &[vec![1.0]], &names(1)).unwrap();
        assert_eq!(a.values, vec![8.0]);
        assert_eq!(a.base_value, 1.0);
    }

    #[test]
    fn symmetric_features_share_equally() {
        let f = |z: &[f64]| z[0] * z[1] + z[2];
        let a = exact_shapley(f, &[2.0, 2.0, 1.0], &[vec![0.0; 3]], &names(3)).unwrap();
        assert!((a.values[0] - a.values[1]).abs() < 1e-15);
        assert!(a.efficiency_gap().abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let f = |_: &[f64]| 0.0;
        assert!(matches!(
            permutation_shapley(f, &[1.0], &[], &names(1), 10, 0),
            Err(AnomalyError::EmptyBackground)
        ));
        assert!(matches!(
            exact_shapley(f, &[0.0; 13], &[vec![0.0; 13]], &names(13)),
            Err(AnomalyError::TooManyFeatures(13))
        ));
    }

    #[test]
    fn csv_ranks_by_magnitude() {
        let a = AttributionVector {
            feature_names: names(3),
            values: vec![0.01, -0.2, 0.05],
            standard_errors: vec![0.0; 3],
            base_value: 0.4,
            score: 0.26,
            n_permutations: 1,
            seed: 0,
        };
        assert_eq!(a.to_csv(), "feature_name,shapley_value,rank\nf1,-0.2,1\nf2,0.05,2\nf0,0.01,3\n");
    }
}
