//! Plain-text `key = value` configuration with command-line overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Every command has a
//! fixed key table; keys outside it are rejected.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

/// One accepted key with its default and a short description.
#[derive(Clone, Copy, Debug)]
pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

pub const fn key(key: &'static str, default: &'static str, doc: &'static str) -> KeySpec {
    KeySpec { key, default, doc }
}

/// Parses `key = value` lines.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value, got {line:?}", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `--set key=value` argument.
pub fn parse_override(arg: &str) -> Result<(String, String), CliError> {
    let (k, v) = arg.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {arg:?}")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Defaults, then the config file, then overrides in order.
#[derive(Clone, Debug)]
pub struct Resolved {
    specs: &'static [KeySpec],
    values: BTreeMap<&'static str, String>,
}

impl Resolved {
    pub fn resolve(
        specs: &'static [KeySpec],
        file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self, CliError> {
        let mut values: BTreeMap<&'static str, String> =
            specs.iter().map(|s| (s.key, s.default.to_string())).collect();
        let mut pairs = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            pairs.extend(parse_kv(&text)?);
        }
        pairs.extend(overrides.iter().cloned());
        for (k, v) in pairs {
            let spec = specs.iter().find(|s| s.key == k).ok_or_else(|| {
                let known: Vec<&str> = specs.iter().map(|s| s.key).collect();
                CliError::Usage(format!("unknown config key {k:?}; accepted keys: {}", known.join(", ")))
            })?;
            values.insert(spec.key, v);
        }
        Ok(Self { specs, values })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("key {key} is not in the table"))
    }

    pub fn get<T>(&self, key: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| CliError::Usage(format!("config key {key}: cannot parse {raw:?}: {e}")))
    }

    /// Comma-separated list.
    pub fn list<T>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.raw(key);
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|p| p.trim().parse().map_err(|e| CliError::Usage(format!("config key {key}: cannot parse {p:?}: {e}"))))
            .collect()
    }

    /// The full configuration in table order, readable back by [`parse_kv`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in self.specs {
            out.push_str(&format!("# {}\n{} = {}\n", s.doc, s.key, self.values[s.key]));
        }
        out
    }
}
