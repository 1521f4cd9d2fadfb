//! Transaction access lists and their JSON form.
//!
//! The wire shape is the standard `accessList` transaction field:
//!
//! ```json
//! [{"address":"0x…","storageKeys":["0x…"]}]
//! ```

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::primitives::{Address, StorageKey};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccessListEntry {
    pub address: Address,
    #[serde(rename = "storageKeys")]
    pub storage_keys: Vec<StorageKey>,
}

impl AccessListEntry {
    pub fn new(address: Address, storage_keys: Vec<StorageKey>) -> Self {
        Self { address, storage_keys }
    }
}

/// Ordered entries. Duplicate addresses and keys are legal and each
/// occurrence is charged.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccessList(pub Vec<AccessListEntry>);

impl AccessList {
    pub fn new(entries: Vec<AccessListEntry>) -> Self {
        Self(entries)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AccessListEntry> {
        self.0.iter()
    }

    pub fn key_count(&self) -> usize {
        self.0.iter().map(|e| e.storage_keys.len()).sum()
    }
}

impl FromIterator<AccessListEntry> for AccessList {
    fn from_iter<I: IntoIterator<Item = AccessListEntry>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a AccessList {
    type Item = &'a AccessListEntry;
    type IntoIter = std::slice::Iter<'a, AccessListEntry>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct SchemaError {
    /// JSON path of the offending value, e.g. `$[1].storageKeys[0]`.
    pub path: String,
    pub message: String,
}

impl SchemaError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Compact canonical JSON: lowercase fixed-width hex, entries in list order.
pub fn encode_tal(tal: &AccessList) -> String {
    serde_json::to_string(tal).expect("access list serialization is infallible")
}

pub fn decode_tal(text: &str) -> Result<AccessList, SchemaError> {
    let value: Value = serde_json::from_str(text).map_err(|e| SchemaError::at("$", e.to_string()))?;
    decode_tal_value(&value)
}

/// Decodes an already-parsed `accessList` value. Unknown object members are
/// ignored.
pub fn decode_tal_value(value: &Value) -> Result<AccessList, SchemaError> {
    let items = value
        .as_array()
        .ok_or_else(|| SchemaError::at("$", "expected an array"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let path = format!("$[{i}]");
            let obj = item
                .as_object()
                .ok_or_else(|| SchemaError::at(&path, "expected an object"))?;
            let address = obj
                .get("address")
                .ok_or_else(|| SchemaError::at(&path, "missing `address`"))?;
            let address = parse_hex::<Address>(address, &format!("{path}.address"))?;
            let keys = obj
                .get("storageKeys")
                .ok_or_else(|| SchemaError::at(&path, "missing `storageKeys`"))?
                .as_array()
                .ok_or_else(|| SchemaError::at(format!("{path}.storageKeys"), "expected an array"))?;
            let storage_keys = keys
                .iter()
                .enumerate()
                .map(|(j, k)| parse_hex::<StorageKey>(k, &format!("{path}.storageKeys[{j}]")))
                .collect::<Result<_, _>>()?;
            Ok(AccessListEntry { address, storage_keys })
        })
        .collect()
}

fn parse_hex<T>(value: &Value, path: &str) -> Result<T, SchemaError>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    let s = value
        .as_str()
        .ok_or_else(|| SchemaError::at(path, "expected a hex string"))?;
    s.parse().map_err(|e: T::Err| SchemaError::at(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_list_encodes_as_brackets() {
        assert_eq!(encode_tal(&AccessList::default()), "[]");
        assert_eq!(decode_tal("[]").unwrap(), AccessList::default());
    }

    #[test]
    fn golden_single_entry() {
        let tal = AccessList::new(vec![AccessListEntry::new(
            Address::from_ordinal(1),
            vec![StorageKey::from_low_u64(2)],
        )]);
        let expected = r#"[{"address":"0x0000000000000000000000000000000000000001","storageKeys":["0x0000000000000000000000000000000000000000000000000000000000000002"]}]"#;
        assert_eq!(encode_tal(&tal), expected);
        assert_eq!(decode_tal(expected).unwrap(), tal);
    }

    #[test]
    fn uppercase_input_canonicalizes() {
        let text = r#"[{"address":"0x00000000000000000000000000000000000000AB","storageKeys":[]}]"#;
        let once = encode_tal(&decode_tal(text).unwrap());
        assert_eq!(once, text.replace("AB", "ab"));
        assert_eq!(encode_tal(&decode_tal(&once).unwrap()), once);
    }

    #[test]
    fn schema_errors_carry_json_path() {
        let err = decode_tal("{}").unwrap_err();
        assert_eq!(err.path, "$");

        let err = decode_tal(r#"[{"address":"0x0000000000000000000000000000000000000001"}]"#).unwrap_err();
        assert_eq!(err.path, "$[0]");
        assert!(err.message.contains("storageKeys"));

        let err = decode_tal(
            r#"[{"address":"0x0000000000000000000000000000000000000001","storageKeys":[]},
                {"address":"0x0000000000000000000000000000000000000002","storageKeys":["0x01"]}]"#,
        )
        .unwrap_err();
        assert_eq!(err.path, "$[1].storageKeys[0]");

        let err = decode_tal(r#"[{"address":7,"storageKeys":[]}]"#).unwrap_err();
        assert_eq!(err.path, "$[0].address");

        assert_eq!(decode_tal("[").unwrap_err().path, "$");
    }
}
