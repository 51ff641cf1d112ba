//! Flat key-value run configuration: a `key = value` file, overridable from
//! the command line, echoed back fully resolved next to the outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Parses a flat `key = value` file; `#` starts a comment, blank lines are
/// skipped.
pub fn parse_kv_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_kv_text(&text, &path.display().to_string())
}

pub fn parse_kv_text(
    text: &str,
    origin: &str,
) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::config(format!(
                "{origin}:{}: expected `key = value`, found `{line}`",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Configuration lookup that records every resolved value (defaults
/// included) for the echo file, and tracks unused keys to catch typos.
pub struct RunConfig {
    values: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
    consumed: BTreeSet<String>,
}

impl RunConfig {
    pub fn new(values: BTreeMap<String, String>) -> Self {
        RunConfig {
            values,
            resolved: BTreeMap::new(),
            consumed: BTreeSet::new(),
        }
    }

    fn note<T: Display>(&mut self, key: &str, value: &T) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.consumed.insert(key.to_string());
        self.values.get(key).cloned()
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn require_str(&mut self, key: &str) -> Result<String, CliError> {
        let v = self
            .raw(key)
            .ok_or_else(|| CliError::config(format!("missing required key `{key}`")))?;
        self.note(key, &v);
        Ok(v)
    }

    pub fn str_or(&mut self, key: &str, default: &str) -> String {
        let v = self.raw(key).unwrap_or_else(|| default.to_string());
        self.note(key, &v);
        v
    }

    pub fn opt_str(&mut self, key: &str) -> Option<String> {
        let v = self.raw(key);
        if let Some(v) = &v {
            self.note(key, v);
        }
        v
    }

    pub fn require_f64(&mut self, key: &str) -> Result<f64, CliError> {
        let raw = self.require_str(key)?;
        parse_f64(key, &raw)
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.raw(key) {
            Some(raw) => {
                let v = parse_f64(key, &raw)?;
                self.note(key, &v);
                Ok(v)
            }
            None => {
                self.note(key, &default);
                Ok(default)
            }
        }
    }

    pub fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            Some(raw) => {
                let v = parse_f64(key, &raw)?;
                self.note(key, &v);
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.raw(key) {
            Some(raw) => {
                let v = raw.parse::<usize>().map_err(|_| {
                    CliError::config(format!("key `{key}`: `{raw}` is not a nonnegative integer"))
                })?;
                self.note(key, &v);
                Ok(v)
            }
            None => {
                self.note(key, &default);
                Ok(default)
            }
        }
    }

    pub fn opt_usize(&mut self, key: &str) -> Result<Option<usize>, CliError> {
        match self.raw(key) {
            Some(raw) => {
                let v = raw.parse::<usize>().map_err(|_| {
                    CliError::config(format!("key `{key}`: `{raw}` is not a nonnegative integer"))
                })?;
                self.note(key, &v);
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.raw(key) {
            Some(raw) => {
                let v = raw.parse::<u64>().map_err(|_| {
                    CliError::config(format!("key `{key}`: `{raw}` is not an integer"))
                })?;
                self.note(key, &v);
                Ok(v)
            }
            None => {
                self.note(key, &default);
                Ok(default)
            }
        }
    }

    pub fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.raw(key) {
            Some(raw) => {
                let v = match raw.as_str() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    other => {
                        return Err(CliError::config(format!(
                            "key `{key}`: `{other}` is not a boolean"
                        )))
                    }
                };
                self.note(key, &v);
                Ok(v)
            }
            None => {
                self.note(key, &default);
                Ok(default)
            }
        }
    }

    /// Fails when the file carried keys this command never looked at.
    pub fn reject_unknown(&self) -> Result<(), CliError> {
        let unknown: Vec<&String> = self
            .values
            .keys()
            .filter(|k| !self.consumed.contains(*k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::config(format!(
                "unknown configuration keys: {}",
                unknown
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )))
        }
    }

    /// Writes the fully resolved configuration (defaults filled in).
    pub fn write_echo(&self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let path = out_dir.join("resolved_config.txt");
        let mut text = String::from("# resolved run configuration\n");
        for (k, v) in &self.resolved {
            text.push_str(&format!("{k} = {v}\n"));
        }
        fs::write(&path, text)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64, CliError> {
    match raw {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => raw
            .parse::<f64>()
            .map_err(|_| CliError::config(format!("key `{key}`: `{raw}` is not a number"))),
    }
}
