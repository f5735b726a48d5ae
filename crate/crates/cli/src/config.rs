//! TOML run configuration merged with command-line flags (flags win).
//!
//! Top-level scalar keys apply to every command; a table named after the
//! command (`[train]`, `[simulate.h1]`, `[multicalib.fit]`, ...) overrides
//! them for that command only.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const DATA_DIR_ENV: &str = "XGBIAS_DATA_DIR";

/// Keys handled by the global options rather than by any command.
const GLOBAL_KEYS: [&str; 3] = ["out_dir", "threads", "config"];

#[derive(Debug, Default)]
pub struct ConfigFile {
    table: toml::Table,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        Ok(ConfigFile { table })
    }

    pub fn global(&self, key: &str) -> Option<&toml::Value> {
        self.table.get(key)
    }

    /// Top-level scalars overlaid with the command's own table.
    pub fn section(&self, path: &[&str]) -> CliResult<Map<String, Value>> {
        let mut out = Map::new();
        for (k, v) in &self.table {
            if !v.is_table() && !GLOBAL_KEYS.contains(&k.as_str()) {
                out.insert(k.clone(), toml_to_json(v));
            }
        }
        let mut node = Some(&self.table);
        for p in path {
            node = node.and_then(|t| t.get(*p)).and_then(|v| v.as_table());
        }
        if let Some(t) = node {
            for (k, v) in t {
                if !v.is_table() {
                    out.insert(k.clone(), toml_to_json(v));
                }
            }
        }
        Ok(out)
    }
}

fn toml_to_json(v: &toml::Value) -> Value {
    match v {
        toml::Value::String(s) => Value::String(s.clone()),
        toml::Value::Integer(i) => Value::from(*i),
        toml::Value::Float(f) => Value::from(*f),
        toml::Value::Boolean(b) => Value::Bool(*b),
        toml::Value::Datetime(d) => Value::String(d.to_string()),
        toml::Value::Array(a) => Value::Array(a.iter().map(toml_to_json).collect()),
        toml::Value::Table(t) => Value::Object(t.iter().map(|(k, v)| (k.clone(), toml_to_json(v))).collect()),
    }
}

/// Flags (nulls dropped) over the config section, deserialised into `P`.
pub fn merge<P: DeserializeOwned>(section: Map<String, Value>, flags: Value) -> CliResult<P> {
    let mut merged = section;
    if let Value::Object(f) = flags {
        for (k, v) in f {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    from_value(Value::Object(merged))
}

pub fn from_value<P: DeserializeOwned>(v: Value) -> CliResult<P> {
    serde_path_to_error::deserialize::<_, P>(v).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        let field = if path == "." {
            inner
                .split('`')
                .nth(1)
                .map(str::to_string)
        } else {
            Some(path)
        };
        CliError::Config { field, message: inner }
    })
}

pub fn data_root() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Absolute path of an existing input. Relative paths that do not exist in
/// the working directory are looked up under the data root.
pub fn resolve_input(field: &str, path: &Path) -> CliResult<PathBuf> {
    let mut candidates = vec![path.to_path_buf()];
    if path.is_relative() {
        if let Some(root) = data_root() {
            candidates.push(root.join(path));
        }
    }
    candidates
        .iter()
        .find(|p| p.exists())
        .map(|p| std::fs::canonicalize(p).unwrap_or_else(|_| p.clone()))
        .ok_or_else(|| CliError::config(field, format!("{} does not exist", path.display())))
}

pub fn resolve_dir(field: &str, path: &Path) -> CliResult<PathBuf> {
    let p = resolve_input(field, path)?;
    if !p.is_dir() {
        return Err(CliError::config(field, format!("{} is not a directory", p.display())));
    }
    Ok(p)
}

/// Output names are relative to the output directory and may not leave it.
pub fn check_output(field: &str, name: &Path) -> CliResult<()> {
    let escapes = name
        .components()
        .any(|c| !matches!(c, std::path::Component::Normal(_) | std::path::Component::CurDir));
    if name.as_os_str().is_empty() || escapes {
        return Err(CliError::config(
            field,
            format!("{} must be a relative path inside the output directory", name.display()),
        ));
    }
    Ok(())
}

pub fn require<T: Copy>(field: &str, v: Option<T>, why: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::config(field, why.to_string()))
}

pub fn non_empty<T>(field: &str, v: &[T]) -> CliResult<()> {
    if v.is_empty() {
        return Err(CliError::config(field, "must not be empty"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Deserialize, PartialEq)]
    struct P {
        seed: Option<u64>,
        #[serde(default)]
        reps: usize,
        alphas: Vec<f64>,
    }

    fn cfg(text: &str) -> ConfigFile {
        ConfigFile {
            table: text.parse().unwrap(),
        }
    }

    #[test]
    fn flags_override_sections_override_globals() {
        let c = cfg("seed = 1\nreps = 5\nalphas = [0.0]\n[simulate.h1]\nreps = 7\n");
        let p: P = merge(c.section(&["simulate", "h1"]).unwrap(), serde_json::json!({"seed": 9, "alphas": null})).unwrap();
        assert_eq!(p, P { seed: Some(9), reps: 7, alphas: vec![0.0] });
        let p: P = merge(c.section(&["train"]).unwrap(), serde_json::json!({})).unwrap();
        assert_eq!(p.reps, 5);
    }

    #[test]
    fn missing_and_mistyped_fields_are_named() {
        let c = cfg("seed = \"x\"\nalphas = [1.0]");
        match merge::<P>(c.section(&[]).unwrap(), serde_json::json!({})) {
            Err(CliError::Config { field, .. }) => assert_eq!(field.as_deref(), Some("seed")),
            other => panic!("{other:?}"),
        }
        match merge::<P>(Map::new(), serde_json::json!({})) {
            Err(CliError::Config { field, .. }) => assert_eq!(field.as_deref(), Some("alphas")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn outputs_must_stay_inside_out_dir() {
        assert!(check_output("out", Path::new("h1.csv")).is_ok());
        assert!(check_output("out", Path::new("figs/h1.csv")).is_ok());
        assert!(check_output("out", Path::new("../h1.csv")).is_err());
        assert!(check_output("out", Path::new("/tmp/h1.csv")).is_err());
    }
}
