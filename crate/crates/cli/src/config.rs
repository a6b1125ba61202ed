//! Layered run configuration: JSON file < `TRANSITORY_*` env vars < flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const ENV_PREFIX: &str = "TRANSITORY_";

/// Keys shared by every subcommand; they are stripped before the
/// command-specific record is parsed and are not part of the config hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Common {
    pub seed: Option<u64>,
    pub workers: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Loaded<C> {
    pub common: Common,
    pub command: C,
    /// The command record after all layers were applied.
    pub effective: Value,
    pub hash: String,
}

pub fn read_file(path: Option<&Path>) -> Result<Value, CliError> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if !v.is_object() {
        return Err(CliError::Config(format!("{}: top level must be a JSON object", path.display())));
    }
    Ok(v)
}

/// `TRANSITORY_N=1000` sets `n`; `TRANSITORY_SERVICE__MEAN=2` sets
/// `service.mean`. Values are parsed as JSON and fall back to strings.
pub fn apply_env(root: &mut Value, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), CliError> {
    let sorted: BTreeMap<String, String> = vars
        .into_iter()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v)))
        .collect();
    for (key, raw) in sorted {
        let path: Vec<&str> = key.split("__").collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(CliError::Config(format!("malformed override {ENV_PREFIX}{}", key.to_ascii_uppercase())));
        }
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        set_path(root, &path, value)?;
    }
    Ok(())
}

fn set_path(root: &mut Value, path: &[&str], value: Value) -> Result<(), CliError> {
    let mut cur = root;
    for (i, key) in path.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override path {} crosses a non-object", path.join("."))))?;
        if i + 1 == path.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = obj.entry(*key).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn take<T: DeserializeOwned>(obj: &mut Map<String, Value>, key: &str) -> Result<Option<T>, CliError> {
    match obj.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| CliError::Config(format!("key `{key}`: {e}"))),
    }
}

/// Hex SHA-256 of the compact JSON form (object keys are sorted).
pub fn hash_value(v: &Value) -> String {
    let bytes = serde_json::to_vec(v).expect("JSON values serialize");
    hex::encode(Sha256::digest(&bytes))
}

fn strip_common(root: &mut Value) -> Result<Overrides, CliError> {
    let obj = root
        .as_object_mut()
        .ok_or_else(|| CliError::Config("configuration must be a JSON object".into()))?;
    Ok(Overrides {
        seed: take(obj, "seed")?,
        workers: take(obj, "workers")?,
        out: take(obj, "out")?,
    })
}

pub fn load<C>(mut root: Value, env: impl IntoIterator<Item = (String, String)>, flags: &Overrides) -> Result<Loaded<C>, CliError>
where
    C: DeserializeOwned + serde::Serialize,
{
    let file = strip_common(&mut root)?;
    // fill defaults first so a nested env override such as
    // MOMENTS__VARIANCE lands inside a complete record
    if let Ok(c) = serde_json::from_value::<C>(root.clone()) {
        root = serde_json::to_value(c).expect("config serializes");
    }
    apply_env(&mut root, env)?;
    let env = strip_common(&mut root)?;
    let seed = flags.seed.or(env.seed).or(file.seed);
    let workers = flags.workers.or(env.workers).or(file.workers).unwrap_or(0);
    let out = flags.out.clone().or(env.out).or(file.out).unwrap_or_else(|| PathBuf::from("out"));
    let command: C = serde_json::from_value(root).map_err(|e| CliError::Config(e.to_string()))?;
    // hash the record with defaults filled in, so equivalent configs agree
    let effective = serde_json::to_value(&command).expect("config serializes");
    let hash = hash_value(&effective);
    Ok(Loaded {
        common: Common { seed, workers, out },
        command,
        effective,
        hash,
    })
}
