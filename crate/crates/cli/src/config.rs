//! Plain-text key-value run configuration with command-line overrides.
//! Lines are `key = value`; `#` starts a comment. Unknown keys are
//! rejected so a typo cannot silently fall back to a default.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const TRAIN_KEYS: &[&str] = &[
    "model",
    "data",
    "train-size",
    "classes",
    "epochs",
    "batch-size",
    "learning-rate",
    "momentum",
    "optimizer",
    "seed",
    "synth-seed",
    "slice-mode",
    "precision",
];

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    values: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn from_file(path: &Path, allowed: &[&str]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut kv = KeyValues::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`", path.display(), lineno + 1);
            };
            kv.set(key.trim(), value.trim(), allowed)?;
        }
        Ok(kv)
    }

    pub fn set(&mut self, key: &str, value: &str, allowed: &[&str]) -> Result<()> {
        if !allowed.contains(&key) {
            bail!(
                "unknown config key `{key}`; valid keys: {}",
                allowed.join(", ")
            );
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn apply_overrides(&mut self, overrides: &[String], allowed: &[&str]) -> Result<()> {
        for o in overrides {
            let Some((key, value)) = o.split_once('=') else {
                bail!("override `{o}` is not of the form key=value");
            };
            self.set(key.trim(), value.trim(), allowed)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_or(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| anyhow::anyhow!("config key `{key}`: cannot parse `{raw}`")),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
