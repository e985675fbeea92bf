use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnomalyError;
use crate::features::FeatureMatrix;
use crate::model::ActivityClass;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub const DEFAULT_TREES: usize = 100;
pub const DEFAULT_SUBSAMPLE: usize = 256;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Average path length of an unsuccessful binary-search-tree lookup among
/// `n` points, with `c(2) = 1` and `c(n ≤ 1) = 0`.
pub fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Internal {
        split_feature: usize,
        split_value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

/// Flat arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
    pub height_limit: usize,
}

impl IsolationTree {
    pub fn leaf(size: usize, height_limit: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf { size }],
            height_limit,
        }
    }

    fn build(data: &[&[f64]], height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = Self {
            nodes: Vec::new(),
            height_limit,
        };
        let idx: Vec<usize> = (0..data.len()).collect();
        tree.grow(data, idx, 0, rng);
        tree
    }

    fn grow(&mut self, data: &[&[f64]], idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: idx.len() });
        if depth >= self.height_limit || idx.len() <= 1 {
            return id;
        }
        let dims = data[idx[0]].len();
        let ranges: Vec<(usize, f64, f64)> = (0..dims)
            .filter_map(|f| {
                let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(data[i][f]), hi.max(data[i][f]))
                });
                (lo < hi).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let split = loop {
            let s = rng.random_range(lo..hi);
            if s > lo {
                break s;
            }
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| data[i][feature] < split);
        let left = self.grow(data, l, depth + 1, rng);
        let right = self.grow(data, r, depth + 1, rng);
        self.nodes[id] = Node::Internal {
            split_feature: feature,
            split_value: split,
            left,
            right,
        };
        id
    }

    /// Edges to the reached leaf plus `c(leaf size)`.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match &self.nodes[node] {
                Node::Leaf { size } => return depth + c_factor(*size),
                Node::Internal {
                    split_feature,
                    split_value,
                    left,
                    right,
                } => {
                    node = if x[*split_feature] < *split_value { *left } else { *right };
                    depth += 1.0;
                }
            }
        }
    }

    pub fn max_depth(&self) -> usize {
        fn walk(t: &IsolationTree, n: usize, d: usize) -> usize {
            match &t.nodes[n] {
                Node::Leaf { .. } => d,
                Node::Internal { left, right, .. } => walk(t, *left, d + 1).max(walk(t, *right, d + 1)),
            }
        }
        walk(self, 0, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub subsample_size: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: DEFAULT_TREES,
            subsample_size: DEFAULT_SUBSAMPLE,
            seed: 0,
        }
    }
}

/// Isolation forest over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestModel {
    pub format: String,
    pub feature_names: Vec<String>,
    /// Requested ψ; trees use `min(ψ, rows)`, stored in `effective_subsample`.
    pub subsample_size: usize,
    pub effective_subsample: usize,
    pub n_trees: usize,
    pub seed: u64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub trees: Vec<IsolationTree>,
}

const FORMAT: &str = "isolation_forest/v1";

pub fn height_limit(subsample: usize) -> usize {
    (subsample as f64).log2().ceil() as usize
}

pub fn fit_forest(x: &FeatureMatrix, params: ForestParams) -> Result<IsolationForestModel, AnomalyError> {
    fit_forest_rows(x.rows(), x.feature_names(), params)
}

pub fn fit_forest_rows(
    rows: &[Vec<f64>],
    feature_names: &[String],
    params: ForestParams,
) -> Result<IsolationForestModel, AnomalyError> {
    if params.n_trees == 0 || params.subsample_size < 2 {
        return Err(AnomalyError::InvalidParameter(format!(
            "n_trees must be ≥ 1 and ψ ≥ 2, got {} and {}",
            params.n_trees, params.subsample_size
        )));
    }
    if rows.len() < 2 {
        return Err(AnomalyError::InsufficientData(rows.len()));
    }
    let d = feature_names.len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(AnomalyError::DimensionMismatch {
            expected: d,
            found: r.len(),
        });
    }
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let s = (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| (0..d).map(|j| (r[j] - mean[j]) / scale[j]).collect())
        .collect();

    let psi = params.subsample_size.min(rows.len());
    let limit = height_limit(psi);
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let tree_seeds: Vec<u64> = (0..params.n_trees).map(|_| master.random()).collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let picked: Vec<&[f64]> = sample(&mut rng, z.len(), psi)
                .into_iter()
                .map(|i| z[i].as_slice())
                .collect();
            IsolationTree::build(&picked, limit, &mut rng)
        })
        .collect();
    Ok(IsolationForestModel {
        format: FORMAT.into(),
        feature_names: feature_names.to_vec(),
        subsample_size: params.subsample_size,
        effective_subsample: psi,
        n_trees: params.n_trees,
        seed: params.seed,
        mean,
        scale,
        trees,
    })
}

impl IsolationForestModel {
    pub fn dims(&self) -> usize {
        self.feature_names.len()
    }

    fn check_dims(&self, x: &[f64]) -> Result<(), AnomalyError> {
        if x.len() != self.dims() {
            return Err(AnomalyError::DimensionMismatch {
                expected: self.dims(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn mean_path_length(&self, x: &[f64]) -> Result<f64, AnomalyError> {
        self.check_dims(x)?;
        let z = self.standardize(x);
        Ok(self.trees.iter().map(|t| t.path_length(&z)).sum::<f64>() / self.trees.len() as f64)
    }

    /// `2^(−E[h(x)] / c(ψ))`.
    pub fn score(&self, x: &[f64]) -> Result<f64, AnomalyError> {
        Ok(score_from_path_length(self.mean_path_length(x)?, self.effective_subsample))
    }

    pub fn score_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, AnomalyError> {
        rows.par_iter().map(|r| self.score(r)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AnomalyError> {
        let m: Self = serde_json::from_str(text).map_err(|e| AnomalyError::Json(e.to_string()))?;
        if m.format != FORMAT {
            return Err(AnomalyError::Json(format!("unsupported model format {:?}", m.format)));
        }
        if m.mean.len() != m.dims() || m.scale.len() != m.dims() || m.trees.len() != m.n_trees {
            return Err(AnomalyError::Json("inconsistent model dimensions".into()));
        }
        Ok(m)
    }
}

pub fn score_from_path_length(mean_path: f64, subsample: usize) -> f64 {
    let c = c_factor(subsample);
    if c == 0.0 {
        return 0.5;
    }
    2f64.powf(-mean_path / c)
}

/// Score ≥ threshold is label 0 (student-like, anomalous); below is label 1.
pub fn classify(score: f64, threshold: f64) -> u8 {
    if score >= threshold {
        0
    } else {
        1
    }
}

/// One forest per activity class, for the per-class training option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassForest {
    pub models: BTreeMap<u8, IsolationForestModel>,
}

impl PerClassForest {
    /// Classes with fewer than two windows get no model.
    pub fn fit(
        x: &FeatureMatrix,
        classes: &[ActivityClass],
        params: ForestParams,
    ) -> Result<Self, AnomalyError> {
        if classes.len() != x.n_rows() {
            return Err(AnomalyError::DimensionMismatch {
                expected: x.n_rows(),
                found: classes.len(),
            });
        }
        let mut groups: BTreeMap<u8, Vec<Vec<f64>>> = BTreeMap::new();
        for (row, c) in x.rows().iter().zip(classes) {
            groups.entry(c.id()).or_default().push(row.clone());
        }
        let mut models = BTreeMap::new();
        for (id, rows) in groups {
            if rows.len() >= 2 {
                let p = ForestParams {
                    seed: params.seed.wrapping_add(id as u64),
                    ..params
                };
                models.insert(id, fit_forest_rows(&rows, x.feature_names(), p)?);
            }
        }
        Ok(Self { models })
    }

    pub fn score(&self, x: &[f64], class: ActivityClass) -> Result<Option<f64>, AnomalyError> {
        self.models.get(&class.id()).map(|m| m.score(x)).transpose()
    }
}
