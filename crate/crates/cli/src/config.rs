//! Flag, config-file and default resolution.
//!
//! A config file is a flat TOML table whose keys are flag names (`max-iter`
//! and `max_iter` are the same key). A `.json` file is read as a run manifest
//! and its `config` object is used, so any run can be repeated from its
//! manifest. Flags win over the file, the file wins over defaults, and every
//! resolved value is recorded for the manifest.

use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub struct Resolver {
    file: Map<String, Value>,
    resolved: Map<String, Value>,
}

fn normalize(key: &str) -> String {
    key.replace('_', "-")
}

fn toml_to_json(v: toml::Value) -> Value {
    match v {
        toml::Value::String(s) => Value::String(s),
        toml::Value::Integer(i) => Value::from(i),
        toml::Value::Float(f) => Value::from(f),
        toml::Value::Boolean(b) => Value::Bool(b),
        toml::Value::Datetime(d) => Value::String(d.to_string()),
        toml::Value::Array(a) => Value::Array(a.into_iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => Value::Object(t.into_iter().map(|(k, v)| (k, toml_to_json(v))).collect()),
    }
}

impl Resolver {
    pub fn empty() -> Self {
        Self {
            file: Map::new(),
            resolved: Map::new(),
        }
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::empty());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let raw: Map<String, Value> = if path.extension().is_some_and(|e| e == "json") {
            let doc: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            match doc.get("config") {
                Some(Value::Object(m)) => m.clone(),
                _ => return Err(CliError::Usage(format!("{} has no \"config\" object", path.display()))),
            }
        } else {
            let table: toml::Table = text
                .parse()
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            table.into_iter().map(|(k, v)| (k, toml_to_json(v))).collect()
        };
        let mut file = Map::new();
        for (k, v) in raw {
            if v.is_object() {
                return Err(CliError::Usage(format!("config key '{k}' must be a plain value")));
            }
            file.insert(normalize(&k), v);
        }
        Ok(Self {
            file,
            resolved: Map::new(),
        })
    }

    /// Raw config-file value, if any.
    pub fn file_value(&self, key: &str) -> Option<&Value> {
        self.file.get(key)
    }

    pub fn record(&mut self, key: &str, value: Value) {
        self.resolved.insert(key.to_string(), value);
    }

    /// Resolves a value whose config form is a string or number parsed with
    /// `FromStr`; it is recorded as its display string.
    pub fn parse<T>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T: FromStr + ToString,
        T::Err: std::fmt::Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(v) => {
                    let text = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    text.parse()
                        .map_err(|e| CliError::Usage(format!("config key '{key}': {e}")))?
                }
                None => default,
            },
        };
        self.record(key, Value::String(value.to_string()));
        Ok(value)
    }

    /// Resolves a value that serializes naturally to JSON (numbers, booleans,
    /// strings).
    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T: serde::Serialize + serde::de::DeserializeOwned,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(v) => serde_json::from_value(v.clone())
                    .map_err(|e| CliError::Usage(format!("config key '{key}': {e}")))?,
                None => default,
            },
        };
        self.record(key, serde_json::to_value(&value).expect("plain value"));
        Ok(value)
    }

    /// Resolves a named choice deserialized from its snake_case name;
    /// hyphens in the config value are accepted as underscores.
    pub fn choice<T>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T: serde::Serialize + serde::de::DeserializeOwned,
    {
        let flag = match (flag, self.file.get(key)) {
            (Some(v), _) => Some(v),
            (None, Some(Value::String(s))) => {
                Some(parse_choice(s).map_err(|e| CliError::Usage(format!("config key '{key}': {e}")))?)
            }
            (None, _) => None,
        };
        self.value(key, flag, default)
    }

    /// Like [`Resolver::value`] for settings without a default; an absent
    /// value is recorded as `null`.
    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T: serde::Serialize + serde::de::DeserializeOwned,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(Value::Null) | None => None,
                Some(v) => Some(
                    serde_json::from_value(v.clone())
                        .map_err(|e| CliError::Usage(format!("config key '{key}': {e}")))?,
                ),
            },
        };
        self.record(key, serde_json::to_value(&value).expect("plain value"));
        Ok(value)
    }

    pub fn resolved(&self) -> &Map<String, Value> {
        &self.resolved
    }
}

/// Parses a snake_case enum name, accepting hyphens. Used as a clap value
/// parser too.
pub fn parse_choice<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    let name = s.trim().to_ascii_lowercase().replace('-', "_");
    serde_json::from_value(Value::String(name)).map_err(|e| {
        let msg = e.to_string();
        // serde reports "unknown variant `x`, expected one of `a`, `b`"
        msg.split(" at line").next().unwrap_or(&msg).to_string()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_flag_then_file_then_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "trees = 7\nmax_iter = 12\nmethod = \"treeimp\"\n").unwrap();
        let mut r = Resolver::load(Some(&path)).unwrap();
        assert_eq!(r.value("trees", Some(3usize), 100).unwrap(), 3);
        assert_eq!(r.value("max-iter", None, 100u32).unwrap(), 12);
        assert_eq!(r.value("alpha", None, 0.05).unwrap(), 0.05);
        assert_eq!(r.parse("method", None, "permut".to_string()).unwrap(), "treeimp");
        assert_eq!(r.resolved()["trees"], 3);
        assert_eq!(r.resolved()["max-iter"], 12);
    }

    #[test]
    fn bad_config_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "trees = \"many\"\n").unwrap();
        let mut r = Resolver::load(Some(&path)).unwrap();
        assert!(matches!(r.value("trees", None, 1usize), Err(CliError::Usage(_))));
        std::fs::write(&path, "[section]\nx = 1\n").unwrap();
        assert!(Resolver::load(Some(&path)).is_err());
    }
}
