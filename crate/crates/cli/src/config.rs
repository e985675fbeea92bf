use std::fmt;
use std::path::{Path, PathBuf};

use esar_core::llm::EndpointConfig;
use serde::{Deserialize, Serialize};

use crate::args::LlmFlags;
use crate::split;

/// Invalid configuration or command-line combination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub gt_dir: Option<PathBuf>,
    pub pred_dir: Option<PathBuf>,
    pub keypoint_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub fixtures_dir: Option<PathBuf>,
    pub split_manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub resolution: Option<f64>,
    pub rounds: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub length_s: Option<f64>,
    pub stride_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub trees: Option<usize>,
    pub psi: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapleyConfig {
    pub permutations: Option<usize>,
    pub background_size: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedbackConfig {
    pub threshold: Option<f64>,
    pub top_k: Option<usize>,
}

/// Everything a run can be configured with; each field is overridable by a flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub metrics: MetricsConfig,
    pub window: WindowConfig,
    pub forest: ForestConfig,
    pub shapley: ShapleyConfig,
    pub feedback: FeedbackConfig,
    pub llm: Option<EndpointConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => Err(config_error(format!("{name} must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("metrics.resolution", self.metrics.resolution)?;
        positive("window.length_s", self.window.length_s)?;
        positive("window.stride_s", self.window.stride_s)?;
        if self.forest.trees == Some(0) {
            return Err(config_error("forest.trees must be at least 1"));
        }
        if matches!(self.forest.psi, Some(p) if p < 2) {
            return Err(config_error("forest.psi must be at least 2"));
        }
        if self.metrics.rounds == Some(0) {
            return Err(config_error("metrics.rounds must be at least 1"));
        }
        if let Some(m) = &self.paths.split_manifest {
            split::load_checked(m)?;
        }
        Ok(())
    }

    /// Endpoint settings: `[llm]` table, then paths.fixtures_dir, then flags.
    pub fn endpoint(&self, flags: &LlmFlags) -> EndpointConfig {
        let mut c = self.llm.clone().unwrap_or_default();
        if c.fixtures_dir.is_none() {
            c.fixtures_dir = self.paths.fixtures_dir.clone();
        }
        if let Some(m) = flags.mode {
            c.mode = m;
        }
        if let Some(u) = &flags.url {
            c.url = Some(u.clone());
        }
        if let Some(m) = &flags.llm_model {
            c.model = m.clone();
        }
        if let Some(f) = &flags.fixtures {
            c.fixtures_dir = Some(f.clone());
        }
        if let Some(e) = &flags.endpoint_id {
            c.endpoint_id = e.clone();
        }
        if let Some(a) = flags.adapter {
            c.adapter = a;
        }
        if let Some(t) = flags.timeout {
            c.timeout_s = t;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg: RunConfig = toml::from_str(
            r#"
            [paths]
            fixtures_dir = "fx"
            [metrics]
            resolution = 0.5
            [window]
            length_s = 3.0
            stride_s = 1.0
            [forest]
            trees = 50
            psi = 128
            seed = 9
            [llm]
            model = "m"
            mode = "record"
            url = "http://localhost:1/v1"
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.forest.psi, Some(128));
        let e = cfg.endpoint(&LlmFlags::default());
        assert_eq!(e.fixtures_dir, Some(PathBuf::from("fx")));
        assert_eq!(e.mode, esar_core::llm::Mode::Record);
        let e = cfg.endpoint(&LlmFlags {
            mode: Some(esar_core::llm::Mode::Replay),
            ..Default::default()
        });
        assert_eq!(e.mode, esar_core::llm::Mode::Replay);
        assert_eq!(e.model, "m");
    }

    #[test]
    fn rejects_bad_values_and_unknown_keys() {
        let bad: RunConfig = toml::from_str("[metrics]\nresolution = 0.0\n").unwrap();
        assert!(bad.validate().is_err());
        assert!(toml::from_str::<RunConfig>("[metrics]\nresolutoin = 1.0\n").is_err());
    }
}
