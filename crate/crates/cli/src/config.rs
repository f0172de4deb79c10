//! Flat `key = value` configuration with `[section]` headers, merged with
//! command-line overrides. Keys are namespaced as `section.key`; flags
//! override file values.

use cavity_core::{CavityError, Result};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CavityError::Parse(format!(
                    "config line {}: expected `key = value`, got {raw:?}",
                    lineno + 1
                )));
            };
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            values.insert(full, value.trim().to_string());
        }
        Ok(Config { values })
    }

    /// Flag override: `--key value` maps onto the unqualified key of any
    /// section (the last path segment).
    pub fn set_override(&mut self, key: &str, value: &str) {
        // Replace every matching tail key, then set the bare key too.
        let matching: Vec<String> = self
            .values
            .keys()
            .filter(|k| k.rsplit('.').next() == Some(key))
            .cloned()
            .collect();
        for k in matching {
            self.values.insert(k, value.to_string());
        }
        self.values.insert(key.to_string(), value.to_string());
    }

    fn lookup(&self, key: &str) -> Option<&str> {
        if let Some(v) = self.values.get(key) {
            return Some(v);
        }
        self.values
            .iter()
            .find(|(k, _)| k.rsplit('.').next() == Some(key))
            .map(|(_, v)| v.as_str())
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.lookup(key)
    }

    pub fn require_str(&self, key: &str) -> Result<&str> {
        self.lookup(key)
            .ok_or_else(|| CavityError::invalid(format!("missing required key `{key}`")))
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.lookup(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| CavityError::Parse(format!("key `{key}`: cannot parse {raw:?}"))),
        }
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| CavityError::invalid(format!("missing required key `{key}`")))
    }

    pub fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn get_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.lookup(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| CavityError::Parse(format!("key `{key}`: bad entry {t:?}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    /// Sorted key/value view for the manifest.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
