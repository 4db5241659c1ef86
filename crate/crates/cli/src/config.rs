//! TOML configuration and backend selection.

use anyhow::{bail, Context, Result};
use hamnav_core::fixtures;
use hamnav_core::reasoning::{OracleBackend, OracleRules, ReasoningBackend, RemoteBackend, RemoteConfig};
use hamnav_core::simulator::{load_world, GridWorld};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Oracle,
    Remote,
}

/// Contents of `--config <file.toml>`.
///
/// ```toml
/// backend = "remote"
/// oracle_rules = "rules.json"
///
/// [remote]
/// base_url = "http://localhost:8000/v1"
/// model = "my-vlm"
/// timeout_s = 30
/// retries = 2
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub backend: BackendKind,
    pub oracle_rules: Option<PathBuf>,
    pub remote: RemoteConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn backend(&self, kind: BackendKind) -> Result<Arc<dyn ReasoningBackend>> {
        Ok(match kind {
            BackendKind::Oracle => {
                let rules = match &self.oracle_rules {
                    Some(p) => {
                        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                        OracleRules::from_json(&text)?
                    }
                    None => fixtures::oracle_rules(),
                };
                Arc::new(OracleBackend::new(rules))
            }
            BackendKind::Remote => Arc::new(RemoteBackend::new(self.remote.clone())?),
        })
    }
}

/// A fixture name or a path to a world file.
pub fn resolve_world(name_or_path: &str) -> Result<GridWorld> {
    if fixtures::world_json(name_or_path).is_some() {
        return Ok(fixtures::world(name_or_path)?);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        bail!("unknown world {name_or_path:?}; fixtures are {}", fixtures::world_names().join(", "));
    }
    Ok(load_world(path)?)
}
