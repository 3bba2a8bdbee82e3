use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Parses a JSON object config file.
pub fn load(path: Option<&Path>) -> Result<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    match serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))? {
        Value::Object(m) => Ok(m),
        _ => bail!("config {} must hold a JSON object", path.display()),
    }
}

/// Fills the unset (`None`) fields of `flags` from `file`. Keys are the
/// snake_case field names. Returns the merged value and its JSON echo.
pub fn merge<A: Serialize + DeserializeOwned>(flags: &A, file: &Map<String, Value>) -> Result<(A, Value)> {
    let Value::Object(mut merged) = serde_json::to_value(flags)? else {
        bail!("flag set is not a struct");
    };
    for (k, v) in file {
        if let Some(slot) = merged.get_mut(k) {
            if slot.is_null() {
                *slot = v.clone();
            }
        }
    }
    let value = Value::Object(merged);
    let args = serde_json::from_value(value.clone()).context("config value has the wrong type")?;
    Ok((args, value))
}

/// Rejects file keys that neither the global nor the command flags know.
pub fn check_keys(file: &Map<String, Value>, known: &[&Value]) -> Result<()> {
    for k in file.keys() {
        if !known.iter().any(|v| v.get(k).is_some()) {
            bail!("unknown config key {k:?}");
        }
    }
    Ok(())
}

/// Parses `"4,5,6"` or the inclusive range `"6-10"`, or a mix.
pub fn parse_n_list(text: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (u32, u32) = (a.trim().parse()?, b.trim().parse()?);
            if b < a {
                bail!("empty qubit range {part:?}");
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().with_context(|| format!("bad qubit count {part:?}"))?);
        }
    }
    if out.is_empty() {
        bail!("no qubit counts given");
    }
    Ok(out)
}
