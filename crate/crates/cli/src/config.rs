//! Run configuration: JSON files with flat dotted keys, overridden by
//! command-line `--set` flags, snapshotted next to every run's outputs.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// Flat dotted-key configuration with file < flag precedence.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, Value>,
}

impl RunConfig {
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut values = BTreeMap::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let parsed: BTreeMap<String, Value> =
                serde_json::from_str(&text).context("config must be a flat JSON object")?;
            values.extend(parsed);
        }
        for item in overrides {
            let Some((key, raw)) = item.split_once('=') else {
                bail!("--set expects key=value, got '{item}'");
            };
            let value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
            values.insert(key.to_string(), value);
        }
        Ok(RunConfig { values })
    }

    pub fn get_usize(&self, key: &str, default: usize) -> usize {
        self.values
            .get(key)
            .and_then(|v| v.as_u64())
            .map(|v| v as usize)
            .unwrap_or(default)
    }

    pub fn get_f64(&self, key: &str, default: f64) -> f64 {
        self.values.get(key).and_then(|v| v.as_f64()).unwrap_or(default)
    }

    pub fn get_str(&self, key: &str, default: &str) -> String {
        self.values
            .get(key)
            .and_then(|v| v.as_str())
            .unwrap_or(default)
            .to_string()
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.values.insert(key.to_string(), value);
    }

    /// Writes the resolved snapshot (sorted keys, schema-versioned).
    pub fn snapshot(&self, dir: &Path, command: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut out = self.values.clone();
        out.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
        out.insert("command".into(), Value::from(command));
        let text = serde_json::to_string_pretty(&out)?;
        std::fs::write(dir.join("config.json"), text)?;
        Ok(())
    }
}
