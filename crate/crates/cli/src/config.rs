use crate::CliError;
use cdsac::agent::{AgentConfig, ProbeSettings};
use cdsac::envs::EnvConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

/// Complete description of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub out_dir: PathBuf,
    /// Environment steps between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: u64,
    /// When set, the final summary includes the critic's overestimation bias.
    pub probe: Option<ProbeSettings>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            agent: AgentConfig::default(),
            out_dir: PathBuf::from("runs/default"),
            checkpoint_interval: 10_000,
            probe: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Applies `dotted.key=value` overrides. Values are parsed as JSON and
    /// fall back to plain strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, CliError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = serde_json::to_value(self).expect("config serializes");
        for item in overrides {
            let (key, raw) = item.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("override {item:?} is not of the form key=value"))
            })?;
            let value =
                serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key, value)?;
        }
        serde_json::from_value(doc).map_err(|e| CliError::Config(format!("after overrides: {e}")))
    }

    /// Replaces the environment with the named one's defaults unless it is
    /// already selected.
    pub fn select_env(&mut self, name: &str) -> Result<(), CliError> {
        if self.env.name() != name {
            self.env = EnvConfig::by_name(name).map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.agent
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.env
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("malformed override key {key:?}")));
    }
    let mut node = doc;
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::Config(format!(
                "override {key:?}: {} is not an object",
                parts[..i].join(".")
            ))
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
    }
    unreachable!("non-empty key")
}
