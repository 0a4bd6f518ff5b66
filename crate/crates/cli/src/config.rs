//! Flat `key = value` configuration files.
//!
//! Keys are the long flag names without the leading dashes (`p`, `L`, `eps`,
//! `c-values`, ...). Blank lines and lines starting with `#` are skipped.
//! Underscores in keys are read as dashes.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Every key a config file may set.
pub const KEYS: &[&str] = &[
    "p",
    "L",
    "eps",
    "r",
    "alpha",
    "trials",
    "seed",
    "normalized",
    "out",
    "format",
    "target-u",
    "c-values",
    "p-values",
    "a-values",
    "p-min",
    "p-max",
    "p-true",
    "d-scale",
    "d",
    "radius-scale",
    "max-degree",
    "n-quad",
    "null",
    "h",
    "sequence",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        text.parse()
            .with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parsed value of `key`, if present.
    pub fn value<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| anyhow!("config key `{key}`: cannot parse `{s}`: {e}"))
            })
            .transpose()
    }

    /// Comma-separated list under `key`, if present.
    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|x| !x.is_empty())
                    .map(|x| {
                        x.parse::<T>()
                            .map_err(|e| anyhow!("config key `{key}`: cannot parse `{x}`: {e}"))
                    })
                    .collect()
            })
            .transpose()
    }
}

impl FromStr for ConfigFile {
    type Err = anyhow::Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got `{raw}`", n + 1);
            };
            let key = k.trim().trim_start_matches("--").replace('_', "-");
            let key = if key == "l" { "L".to_string() } else { key };
            if !KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key `{}`", n + 1, k.trim());
            }
            let value = v.trim().trim_matches('"').to_string();
            if entries.insert(key.clone(), value).is_some() {
                bail!("line {}: key `{key}` set twice", n + 1);
            }
        }
        Ok(Self { entries })
    }
}
