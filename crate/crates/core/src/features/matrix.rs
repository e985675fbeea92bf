use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::keypoints::Role;
use super::window::WindowSpec;
use super::FeatureError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowProvenance {
    pub video_id: String,
    pub start_s: f64,
    pub role: Role,
    pub session: String,
}

/// Windows × named features, with one provenance record per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    window_spec: WindowSpec,
    provenance: Vec<WindowProvenance>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    window_spec: WindowSpec,
    feature_count: usize,
    provenance: Vec<WindowProvenance>,
}

impl FeatureMatrix {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        window_spec: WindowSpec,
        provenance: Vec<WindowProvenance>,
    ) -> Result<Self, FeatureError> {
        if provenance.len() != rows.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: rows.len(),
                found: provenance.len(),
            });
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(FeatureError::DimensionMismatch {
                    expected: feature_names.len(),
                    found: row.len(),
                });
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(FeatureError::NonFinite { row: r, column: c });
            }
        }
        Ok(Self {
            feature_names,
            rows,
            window_spec,
            provenance,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn window_spec(&self) -> WindowSpec {
        self.window_spec
    }

    pub fn provenance(&self) -> &[WindowProvenance] {
        &self.provenance
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Stack matrices built with identical feature names and window spec.
    pub fn concat(parts: &[FeatureMatrix]) -> Result<Self, FeatureError> {
        let first = parts.first().ok_or(FeatureError::EmptySeries)?;
        let mut rows = Vec::new();
        let mut provenance = Vec::new();
        for m in parts {
            if m.feature_names != first.feature_names || m.window_spec != first.window_spec {
                return Err(FeatureError::IncompatibleMatrices);
            }
            rows.extend(m.rows.iter().cloned());
            provenance.extend(m.provenance.iter().cloned());
        }
        Self::new(first.feature_names.clone(), rows, first.window_spec, provenance)
    }

    /// Rows whose provenance satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(&WindowProvenance) -> bool) -> Self {
        let (rows, provenance) = self
            .rows
            .iter()
            .zip(&self.provenance)
            .filter(|(_, p)| keep(p))
            .map(|(r, p)| (r.clone(), p.clone()))
            .unzip();
        Self {
            feature_names: self.feature_names.clone(),
            rows,
            window_spec: self.window_spec,
            provenance,
        }
    }

    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("json")
    }

    /// Feature-name header CSV plus a `.json` provenance sidecar next to it.
    pub fn write(&self, csv_path: &Path) -> Result<(), FeatureError> {
        let io = |e: std::io::Error| FeatureError::Io(e.to_string());
        let mut w = csv::Writer::from_path(csv_path).map_err(|e| FeatureError::Io(e.to_string()))?;
        w.write_record(&self.feature_names).map_err(|e| FeatureError::Io(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))
                .map_err(|e| FeatureError::Io(e.to_string()))?;
        }
        w.flush().map_err(io)?;
        let sidecar = Sidecar {
            window_spec: self.window_spec,
            feature_count: self.feature_names.len(),
            provenance: self.provenance.clone(),
        };
        let text = serde_json::to_string_pretty(&sidecar).map_err(|e| FeatureError::Io(e.to_string()))?;
        std::fs::write(Self::sidecar_path(csv_path), text).map_err(io)
    }

    pub fn read(csv_path: &Path) -> Result<Self, FeatureError> {
        let err = |e: &dyn std::fmt::Display| FeatureError::Io(format!("{}: {e}", csv_path.display()));
        let mut r = csv::Reader::from_path(csv_path).map_err(|e| err(&e))?;
        let feature_names: Vec<String> = r.headers().map_err(|e| err(&e))?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| err(&e))?;
            rows.push(
                rec.iter()
                    .map(|v| v.parse::<f64>().map_err(|e| err(&e)))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        let text = std::fs::read_to_string(Self::sidecar_path(csv_path)).map_err(|e| err(&e))?;
        let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| err(&e))?;
        if sidecar.feature_count != feature_names.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: sidecar.feature_count,
                found: feature_names.len(),
            });
        }
        Self::new(feature_names, rows, sidecar.window_spec, sidecar.provenance)
    }
}
