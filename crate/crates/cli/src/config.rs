//! Config loading: one JSON document per command plus `--set` overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde_json::Value;

/// A parsed config and the directory its relative paths are resolved
/// against.
pub struct Loaded<T> {
    pub config: T,
    pub base: PathBuf,
}

impl<T> Loaded<T> {
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

pub fn load<T: DeserializeOwned>(path: Option<&Path>, sets: &[String]) -> Result<Loaded<T>> {
    load_with(path, sets, |_| Ok(()))
}

/// Like [`load`], with a hook that may fill defaults into the merged
/// document before it is deserialized.
pub fn load_with<T: DeserializeOwned>(
    path: Option<&Path>,
    sets: &[String],
    prepare: impl FnOnce(&mut Value) -> Result<()>,
) -> Result<Loaded<T>> {
    let (mut doc, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            let doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (doc, base)
        }
        None => (Value::Object(Default::default()), PathBuf::new()),
    };
    for s in sets {
        apply_set(&mut doc, s)?;
    }
    prepare(&mut doc)?;
    let config = serde_json::from_value(doc).context("invalid configuration")?;
    Ok(Loaded { config, base })
}

/// Applies `a.b.c=value`; the value is read as JSON when it parses, as a
/// string otherwise. Intermediate objects are created as needed.
pub fn apply_set(doc: &mut Value, set: &str) -> Result<()> {
    let Some((key, raw)) = set.split_once('=') else {
        bail!("override `{set}` is not KEY=VALUE");
    };
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    if matches!(value, Value::Object(_) | Value::Array(_)) {
        bail!("override `{key}` must be a scalar");
    }
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            bail!("override key `{key}` has an empty component");
        }
        let Value::Object(map) = node else {
            bail!("override `{key}`: `{}` is not an object", parts[..i].join("."));
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}

/// Replaces `doc[key]` by `defaults` overlaid with whatever `doc[key]`
/// already held, recursively for objects.
pub fn overlay_defaults(doc: &mut Value, key: &str, defaults: Value) -> Result<()> {
    let Value::Object(map) = doc else {
        bail!("configuration must be a JSON object");
    };
    let mut merged = defaults;
    if let Some(user) = map.remove(key) {
        overlay(&mut merged, user);
    }
    map.insert(key.to_string(), merged);
    Ok(())
}

/// Enum tags; a user object naming a different variant replaces the default.
const TAGS: [&str; 1] = ["mode"];

fn overlay(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u))
            if !TAGS.iter().any(|t| u.contains_key(*t) && b.get(*t) != u.get(*t)) =>
        {
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Reads the `preset` string of a document (`plate` when absent).
pub fn preset(doc: &Value) -> Result<String> {
    match doc.get("preset") {
        None => Ok("plate".into()),
        Some(Value::String(s)) if s == "plate" || s == "airfoil" => Ok(s.clone()),
        Some(v) => bail!("preset must be \"plate\" or \"airfoil\", got {v}"),
    }
}
