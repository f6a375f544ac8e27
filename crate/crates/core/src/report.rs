//! Provenance-stamped analysis reports.
//!
//! Reports serialize to JSON with sorted keys and every float rounded to 12
//! significant digits, so identical runs write identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{Result, TOOL_VERSION};

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Input id to file path (or generator description).
    pub inputs: BTreeMap<String, String>,
    pub parameters: Value,
    pub seed: u64,
    pub tool_version: String,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(inputs: BTreeMap<String, String>, parameters: Value, seed: u64) -> Self {
        let config_hash = config_hash(&parameters, seed);
        Self {
            inputs,
            parameters,
            seed,
            tool_version: TOOL_VERSION.to_string(),
            config_hash,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub provenance: Provenance,
    #[serde(default)]
    pub results: BTreeMap<String, Value>,
}

impl AnalysisReport {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            provenance,
            results: BTreeMap::new(),
        }
    }

    /// Adds a result block under `name`.
    pub fn insert(&mut self, name: impl Into<String>, block: impl Serialize) -> Result<()> {
        self.results.insert(name.into(), serde_json::to_value(block)?);
        Ok(())
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        to_canonical_json(self)
    }
}

/// Rounds `x` to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap_or(0.0));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        // serde_json's default map is a BTreeMap, so keys come out sorted
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and rounded floats, newline-terminated.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = canonicalize(serde_json::to_value(value)?);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_canonical_json(value)?)?;
    Ok(())
}

pub fn save_report(report: &AnalysisReport, path: impl AsRef<Path>) -> Result<()> {
    save_json(report, path)
}

pub fn load_report(path: impl AsRef<Path>) -> Result<AnalysisReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Short hex digest identifying a parameter set and seed.
pub fn config_hash(parameters: &Value, seed: u64) -> String {
    let canonical = serde_json::to_string(&canonicalize(parameters.clone())).unwrap_or_default();
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    h.update(seed.to_le_bytes());
    hex(&h.finalize()[..8])
}

/// Serializes `value` and adds top-level `config_hash` and `seed` fields.
///
/// Non-object values are wrapped as `{"data": value}`. Readers of the
/// underlying type ignore the extra fields.
pub fn stamped<T: Serialize>(value: &T, config_hash: &str, seed: u64) -> Result<Value> {
    let mut v = serde_json::to_value(value)?;
    if !v.is_object() {
        v = serde_json::json!({ "data": v });
    }
    let obj = v.as_object_mut().expect("object");
    obj.insert("config_hash".into(), Value::String(config_hash.to_string()));
    obj.insert("seed".into(), Value::from(seed));
    Ok(v)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
