//! Plain-text `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result, bail};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Every value actually used, with its source applied.
    resolved: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got `{}`", n + 1, raw.trim());
            };
            let key = k.trim();
            if key.is_empty() {
                bail!("line {}: empty key", n + 1);
            }
            values.insert(key.replace('-', "_"), v.trim().trim_matches('"').to_string());
        }
        Ok(Self { values, resolved: BTreeMap::new() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Command-line value, else the file value, else `default`.
    pub fn get<T>(&mut self, key: &str, cli: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match cli {
            Some(v) => v,
            None => match self.values.get(key) {
                Some(s) => s.parse().map_err(|e| anyhow::anyhow!("config `{key} = {s}`: {e}"))?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn get_opt<T>(&mut self, key: &str, cli: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match cli {
            Some(v) => Some(v),
            None => match self.values.get(key) {
                Some(s) => Some(s.parse().map_err(|e| anyhow::anyhow!("config `{key} = {s}`: {e}"))?),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    /// File keys never read by the command (likely typos).
    pub fn unused(&self) -> Vec<&str> {
        self.values.keys().filter(|k| !self.resolved.contains_key(*k)).map(String::as_str).collect()
    }
}
