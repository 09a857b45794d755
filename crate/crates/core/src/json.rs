//! Canonical JSON: object keys sorted, shortest round-trip float formatting.

use serde::Serialize;

/// Serializes through `serde_json::Value`, whose maps are ordered by key.
pub fn canonical<T: Serialize + ?Sized>(value: &T) -> String {
    let tree = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string(&tree).expect("value serializes")
}

/// Same ordering as [`canonical`], indented.
pub fn canonical_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let tree = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string_pretty(&tree).expect("value serializes")
}
