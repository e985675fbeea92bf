use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LlmError;

/// The part of a request that determines its response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeRequest {
    pub model: String,
    pub prompt: String,
    /// Video path/URI or fixture id; never decoded.
    pub attachment: Option<String>,
}

impl ExchangeRequest {
    /// SHA-256 of the canonical JSON `{model, prompt, attachment}`.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeRecord {
    pub digest: String,
    pub prompt_id: String,
    pub attachment: Option<String>,
    pub response: String,
    /// Unix seconds.
    pub timestamp: u64,
    pub endpoint_id: String,
}

/// Directory of `<digest>.json` exchange records.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    pub fn load(&self, digest: &str) -> Result<ExchangeRecord, LlmError> {
        let path = self.path_for(digest);
        let text = std::fs::read_to_string(&path).map_err(|_| LlmError::FixtureMissing(digest.to_string()))?;
        let record: ExchangeRecord =
            serde_json::from_str(&text).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        if record.digest != digest {
            return Err(LlmError::Io(format!("{} holds digest {}", path.display(), record.digest)));
        }
        Ok(record)
    }

    pub fn save(&self, record: &ExchangeRecord) -> Result<PathBuf, LlmError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| LlmError::Io(e.to_string()))?;
        let path = self.path_for(&record.digest);
        let text = serde_json::to_string_pretty(record).expect("record serializes");
        std::fs::write(&path, text).map_err(|e| LlmError::Io(e.to_string()))?;
        Ok(path)
    }
}
