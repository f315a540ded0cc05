//! Provenance attached to every artifact the command line writes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::hash::file_digest;
use crate::{Error, Result, TOOL_VERSION};

/// Inputs, resolved parameters and tool version of one invocation. Holds no
/// timestamps, so identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub params: BTreeMap<String, Value>,
    /// Input path → FNV-1a-64 digest of its bytes, as `0x`-prefixed hex.
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        RunManifest {
            subcommand: subcommand.to_owned(),
            tool_version: TOOL_VERSION.to_owned(),
            params: BTreeMap::new(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_owned(), value.into());
        self
    }

    pub fn input(mut self, path: &Path) -> Result<Self> {
        let digest = file_digest(path)?;
        self.inputs
            .insert(path.display().to_string(), format!("{digest:#018x}"));
        Ok(self)
    }

    /// `<artifact>.manifest.json`, for artifacts whose format cannot embed it.
    pub fn sidecar_path(artifact: &Path) -> PathBuf {
        let mut name = artifact.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write_sidecar(&self, artifact: &Path) -> Result<PathBuf> {
        let path = Self::sidecar_path(artifact);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::format(&path, e))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
