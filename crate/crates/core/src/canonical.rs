//! Canonical byte encoding and content digests.
//!
//! Every signable or addressable object in this crate is reduced to a single
//! canonical byte form before hashing: JSON with object keys in lexicographic
//! order, UTF-8, no insignificant whitespace, and integers written in decimal.
//! Two structurally equal values therefore always produce identical bytes,
//! which makes transaction ids, block hashes, contract addresses, and
//! signatures reproducible across processes and platforms.
//!
//! Floating point numbers are rejected: the scalar domain of the testbed is
//! closed over integers, booleans, and strings, and admitting floats would
//! reintroduce formatting ambiguity.

use serde::Serialize;
use sha2::{Digest as _, Sha256};
use std::fmt;

/// Hex-encoded SHA-256 digest. Used for transaction ids, block hashes,
/// event ids, account addresses, and signatures alike.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Digest(pub String);

impl Digest {
    pub fn of_bytes(bytes: &[u8]) -> Digest {
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        Digest(hex_encode(&hasher.finalize()))
    }

    /// Digest of the canonical byte form of any serializable value.
    pub fn of_value<T: Serialize>(value: &T) -> Digest {
        Digest::of_bytes(&canonical_bytes(value))
    }

    /// The all-zero digest, used as the genesis parent link.
    pub fn zero() -> Digest {
        Digest("0".repeat(64))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn hex_encode(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use fmt::Write;
        write!(s, "{b:02x}").expect("writing to string cannot fail");
    }
    s
}

/// Serializes `value` to its canonical byte form.
///
/// Panics if the value contains a non-integer number or fails to serialize;
/// both indicate a programming error, since all digested types in this crate
/// are plain data over the closed scalar domain.
pub fn canonical_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let tree = serde_json::to_value(value).expect("value must serialize to JSON");
    let mut out = Vec::new();
    write_canonical(&tree, &mut out);
    out
}

/// Canonical form as a string, for payload fields that carry embedded documents.
pub fn canonical_string<T: Serialize>(value: &T) -> String {
    String::from_utf8(canonical_bytes(value)).expect("canonical JSON is UTF-8")
}

fn write_canonical(value: &serde_json::Value, out: &mut Vec<u8>) {
    use serde_json::Value;
    match value {
        Value::Null | Value::Bool(_) | Value::String(_) => {
            serde_json::to_writer(&mut *out, value).expect("scalar serialization")
        }
        Value::Number(n) => {
            if n.is_f64() {
                panic!("canonical encoding rejects non-integer numbers: {n}");
            }
            serde_json::to_writer(&mut *out, value).expect("integer serialization")
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_canonical(item, out);
            }
            out.push(b']');
        }
        Value::Object(map) => {
            // serde_json may preserve insertion order depending on feature
            // unification, so ordering is enforced here rather than assumed.
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_unstable();
            out.push(b'{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                serde_json::to_writer(&mut *out, key).expect("key serialization");
                out.push(b':');
                write_canonical(&map[key.as_str()], out);
            }
            out.push(b'}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_and_whitespace_free() {
        let v = json!({"b": 2, "a": 1, "nested": {"z": [1, 2], "y": "s"}});
        let bytes = canonical_bytes(&v);
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            r#"{"a":1,"b":2,"nested":{"y":"s","z":[1,2]}}"#
        );
    }

    #[test]
    fn integers_render_in_decimal() {
        let v = json!({"n": 1234567890123_i64, "neg": -7});
        assert_eq!(
            canonical_string(&v),
            r#"{"n":1234567890123,"neg":-7}"#
        );
    }

    #[test]
    fn equal_values_share_bytes_regardless_of_insertion_order() {
        let a = json!({"x": 1, "y": {"k": true}});
        let b = json!({"y": {"k": true}, "x": 1});
        assert_eq!(canonical_bytes(&a), canonical_bytes(&b));
    }

    #[test]
    fn digest_matches_known_sha256_vector() {
        // sha256("") is a fixed, widely published value.
        assert_eq!(
            Digest::of_bytes(b"").as_str(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            Digest::of_bytes(b"abc").as_str(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    #[should_panic(expected = "non-integer")]
    fn floats_are_rejected() {
        canonical_bytes(&json!({"pi": 3.14}));
    }

    #[test]
    fn zero_digest_is_64_zeros() {
        assert_eq!(Digest::zero().as_str().len(), 64);
        assert!(Digest::zero().as_str().chars().all(|c| c == '0'));
    }
}
