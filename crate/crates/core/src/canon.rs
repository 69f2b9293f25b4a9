//! Canonical JSON: object keys sorted, no insignificant whitespace, and no
//! floats (every number in this crate's payloads is a string `"p/q"` or a
//! machine integer).

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

fn canonicalize(v: Value) -> Result<Value> {
    Ok(match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::with_capacity(entries.len());
            for (k, v) in entries {
                out.insert(k, canonicalize(v)?);
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect::<Result<_>>()?),
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => {
            return Err(Error::Parse(format!("float {n} in canonical payload")));
        }
        other => other,
    })
}

pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String> {
    let v = canonicalize(serde_json::to_value(value)?)?;
    Ok(serde_json::to_string(&v)?)
}

pub fn sha256_hex<T: Serialize>(value: &T) -> Result<String> {
    let s = to_canonical_string(value)?;
    Ok(hex::encode(Sha256::digest(s.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_compact() {
        let v = json!({"b": {"z": 1, "a": [3, {"y": "q", "x": "p"}]}, "a": "1/2"});
        assert_eq!(to_canonical_string(&v).unwrap(), r#"{"a":"1/2","b":{"a":[3,{"x":"p","y":"q"}],"z":1}}"#);
    }

    #[test]
    fn floats_rejected() {
        assert!(to_canonical_string(&json!({"a": 0.5})).is_err());
    }

    #[test]
    fn hash_is_stable() {
        let a = sha256_hex(&json!({"x": 1, "y": 2})).unwrap();
        let b = sha256_hex(&json!({"y": 2, "x": 1})).unwrap();
        assert_eq!(a, b);
    }
}
