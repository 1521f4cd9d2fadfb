//! Fixed-width byte strings used throughout: account addresses, storage keys
//! and transaction hashes.
//!
//! Canonical text form is lowercase hex with a `0x` prefix, zero-padded to the
//! full width. Parsing is case-insensitive but requires the full width.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HexError {
    #[error("missing 0x prefix")]
    MissingPrefix,
    #[error("expected {expected} hex digits, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("invalid hex digit")]
    InvalidDigit,
}

macro_rules! fixed_bytes {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub const fn new(bytes: [u8; $len]) -> Self {
                Self(bytes)
            }

            /// Builds a value whose trailing eight bytes hold `n` big-endian.
            pub fn from_low_u64(n: u64) -> Self {
                let mut bytes = [0u8; $len];
                bytes[$len - 8..].copy_from_slice(&n.to_be_bytes());
                Self(bytes)
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }
        }

        impl FromStr for $name {
            type Err = HexError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let digits = s
                    .strip_prefix("0x")
                    .or_else(|| s.strip_prefix("0X"))
                    .ok_or(HexError::MissingPrefix)?;
                if digits.len() != 2 * $len {
                    return Err(HexError::BadLength { expected: 2 * $len, got: digits.len() });
                }
                let mut bytes = [0u8; $len];
                hex::decode_to_slice(digits, &mut bytes).map_err(|_| HexError::InvalidDigit)?;
                Ok(Self(bytes))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "0x{}", hex::encode(self.0))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(self, f)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

fixed_bytes!(
    /// 20-byte account address.
    Address,
    20
);

fixed_bytes!(
    /// 32-byte word: storage keys and transaction hashes.
    B256,
    32
);

pub type StorageKey = B256;
pub type TxHash = B256;

impl Address {
    /// Address whose numeric value is `n`, e.g. `0x…09` for the ninth precompile.
    pub fn from_ordinal(n: u64) -> Self {
        Self::from_low_u64(n)
    }

    /// Interprets a 256-bit EVM word (hex, any length up to 64 digits, with or
    /// without prefix) as an address by keeping its low 20 bytes.
    pub fn from_word_hex(word: &str) -> Result<Self, HexError> {
        let word = B256::from_word_hex(word)?;
        let mut bytes = [0u8; 20];
        bytes.copy_from_slice(&word.0[12..]);
        Ok(Self(bytes))
    }
}

impl B256 {
    /// Parses a stack word as emitted by tracers: optional `0x`, leading zeros
    /// possibly trimmed.
    pub fn from_word_hex(word: &str) -> Result<Self, HexError> {
        let digits = word.strip_prefix("0x").unwrap_or(word);
        if digits.is_empty() || digits.len() > 64 {
            return Err(HexError::BadLength {
                expected: 64,
                got: digits.len(),
            });
        }
        let mut padded = String::with_capacity(64);
        padded.extend(std::iter::repeat_n('0', 64 - digits.len()));
        padded.push_str(digits);
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(&padded, &mut bytes).map_err(|_| HexError::InvalidDigit)?;
        Ok(Self(bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_is_lowercase_and_padded() {
        let a = Address::from_ordinal(1);
        assert_eq!(a.to_string(), "0x0000000000000000000000000000000000000001");
        let k = B256::from_low_u64(0xab);
        assert_eq!(
            k.to_string(),
            "0x00000000000000000000000000000000000000000000000000000000000000ab"
        );
    }

    #[test]
    fn parse_accepts_mixed_case() {
        let a: Address = "0xAbCdEf0000000000000000000000000000000001".parse().unwrap();
        assert_eq!(a.to_string(), "0xabcdef0000000000000000000000000000000001");
    }

    #[test]
    fn parse_rejects_short_and_unprefixed() {
        assert_eq!(
            "0x01".parse::<Address>(),
            Err(HexError::BadLength { expected: 40, got: 2 })
        );
        assert_eq!(
            "0000000000000000000000000000000000000001".parse::<Address>(),
            Err(HexError::MissingPrefix)
        );
        assert_eq!(
            "0xzz00000000000000000000000000000000000001".parse::<Address>(),
            Err(HexError::InvalidDigit)
        );
    }

    #[test]
    fn stack_words_keep_low_bytes() {
        let a = Address::from_word_hex("0x1f").unwrap();
        assert_eq!(a, Address::from_ordinal(0x1f));
        let full = "000000000000000000000000deadbeef00000000000000000000000000000002";
        let a = Address::from_word_hex(full).unwrap();
        assert_eq!(a.to_string(), "0xdeadbeef00000000000000000000000000000002");
    }
}
