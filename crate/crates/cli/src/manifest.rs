//! Run directories: every artifact a subcommand writes, plus `manifest.json`
//! with the sha256 of each input and output. No timestamps, so identical
//! inputs give byte-identical run directories.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    parameters: &'a serde_json::Value,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl RunDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating run directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Read an input file, recording its digest.
    pub fn read(&mut self, path: &Path) -> anyhow::Result<String> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.record_input(path, &bytes);
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn record_input(&mut self, path: &Path, bytes: &[u8]) {
        let path = path.display().to_string();
        if !self.inputs.iter().any(|d| d.path == path) {
            self.inputs.push(FileDigest {
                path,
                sha256: sha256_hex(bytes),
            });
        }
    }

    /// Digest a file written by someone else into the run directory.
    pub fn record_output(&mut self, rel: &str) -> anyhow::Result<()> {
        let bytes = std::fs::read(self.root.join(rel)).with_context(|| format!("reading back {rel}"))?;
        self.outputs.retain(|d| d.path != rel);
        self.outputs.push(FileDigest {
            path: rel.to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, contents.as_ref()).with_context(|| format!("writing {}", path.display()))?;
        self.record_output(rel)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    pub fn finish(mut self, command: &str, parameters: serde_json::Value) -> anyhow::Result<PathBuf> {
        self.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let m = Manifest {
            command,
            parameters: &parameters,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let path = self.root.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
