//! Flag resolution: command line, then config file, then defaults.

use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::user;

#[derive(Debug, Default)]
pub struct Config {
    values: Map<String, Value>,
}

impl Config {
    /// Reads a JSON object keyed by flag names. A run manifest is accepted
    /// as well; its `parameters` object is used and its subcommand must match.
    pub fn load(path: Option<&Path>, subcommand: &str) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| user(format!("{}: invalid JSON: {e}", path.display())))?;
        let Value::Object(mut obj) = value else {
            return Err(user(format!("{}: config must be a JSON object", path.display())));
        };
        if let Some(Value::Object(params)) = obj.remove("parameters") {
            if let Some(cmd) = obj.get("subcommand").and_then(Value::as_str) {
                if cmd != subcommand {
                    return Err(user(format!(
                        "{}: manifest is for '{cmd}', not '{subcommand}'",
                        path.display()
                    )));
                }
            }
            return Ok(Self { values: params });
        }
        Ok(Self { values: obj })
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> anyhow::Result<Option<T>> {
        match self.values.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| user(format!("config key '{key}': {e}"))),
        }
    }

    /// Flag if given, else config, else `default`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> anyhow::Result<T> {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    pub fn pick_opt<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> anyhow::Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// A string flag whose config value may also be a number (`mu0`, `sigma0`).
    pub fn pick_text(&self, flag: Option<String>, key: &str, default: &str) -> anyhow::Result<String> {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(match self.values.get(key) {
            None | Some(Value::Null) => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(other) => return Err(user(format!("config key '{key}': unexpected value {other}"))),
        })
    }
}
