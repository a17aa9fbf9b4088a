//! Flat `key = value` text format shared by pipeline configs and dataset manifests.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Result, VistaError};

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// skipped; duplicate keys are rejected.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(VistaError::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(VistaError::Config(format!("line {}: empty key", lineno + 1)));
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(VistaError::Config(format!(
                "line {}: duplicate key `{key}`",
                lineno + 1
            )));
        }
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| VistaError::io(path, e))?;
    parse(&text)
}

pub fn render(entries: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(v);
        s.push('\n');
    }
    s
}
