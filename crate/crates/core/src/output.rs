//! Shared formatting for CSV/JSON artifacts: fixed 12 significant digits and
//! a provenance block hashed from the run configuration.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` in scientific notation with 12 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
    } else {
        x.to_string()
    }
}

/// `x` rounded to 12 significant digits (non-finite values pass through).
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    fmt_f64(x).parse().unwrap_or(x)
}

/// Rounds every float inside a JSON value to 12 significant digits.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Reproducibility metadata attached to every artifact. Contains no
/// timestamps so identical runs produce identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the canonical JSON encoding of `config`.
    pub config_hash: String,
    pub config: Value,
}

impl Provenance {
    pub fn new<C: Serialize>(tool: &str, config: &C) -> Result<Provenance> {
        let config = serde_json::to_value(config)?;
        let canonical = serde_json::to_vec(&config)?;
        let hash = Sha256::digest(&canonical);
        Ok(Provenance {
            tool: tool.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hex::encode(hash),
            config,
        })
    }
}

/// Serialises `payload` with a `provenance` field, floats rounded.
pub fn to_json_with_provenance<T: Serialize>(payload: &T, provenance: &Provenance) -> Result<String> {
    let mut v = serde_json::to_value(payload)?;
    if let Value::Object(map) = &mut v {
        map.insert("provenance".into(), serde_json::to_value(provenance)?);
    } else {
        v = serde_json::json!({ "result": v, "provenance": provenance });
    }
    round_json(&mut v);
    Ok(serde_json::to_string_pretty(&v)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt_f64(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        let mut v = serde_json::json!({ "a": [0.30000000000000004, 1], "b": { "c": 2.0000000000001 } });
        round_json(&mut v);
        assert_eq!(v["a"][0].as_f64(), Some(0.3));
        assert_eq!(v["b"]["c"].as_f64(), Some(2.0));
    }

    #[test]
    fn provenance_is_deterministic() {
        let a = Provenance::new("t", &serde_json::json!({ "x": 1 })).unwrap();
        let b = Provenance::new("t", &serde_json::json!({ "x": 1 })).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.config_hash.len(), 64);
    }
}
