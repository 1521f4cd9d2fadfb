//! Opcode to access-event mapping, loaded from JSON so later forks can extend
//! it without code changes.

use std::collections::HashMap;

use serde::Deserialize;

const BUILTIN: &str = include_str!("../data/opcodes.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Address,
    StorageRead,
    StorageWrite,
    /// Opens a frame whose address is known only once it returns.
    Create,
}

/// Whose storage a called frame executes against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameContext {
    Target,
    Caller,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpcodeRule {
    pub kind: RuleKind,
    /// Operand position counted from the top of the stack.
    #[serde(default)]
    pub stack: Option<usize>,
    /// Set for opcodes that may enter a new frame.
    #[serde(default)]
    pub frame: Option<FrameContext>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpcodeMap {
    rules: HashMap<String, OpcodeRule>,
}

impl OpcodeMap {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let rules: HashMap<String, OpcodeRule> = serde_json::from_str(text)?;
        for (op, rule) in &rules {
            let needs_stack = rule.kind != RuleKind::Create;
            if needs_stack != rule.stack.is_some() {
                return Err(serde::de::Error::custom(format!(
                    "{op}: `stack` required for all but create rules"
                )));
            }
        }
        Ok(Self { rules })
    }

    pub fn get(&self, op: &str) -> Option<&OpcodeRule> {
        self.rules.get(op)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

impl Default for OpcodeMap {
    fn default() -> Self {
        Self::from_json(BUILTIN).expect("built-in opcode table is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table() {
        let map = OpcodeMap::default();
        assert_eq!(map.len(), 13);
        assert_eq!(map.get("CALL").unwrap().stack, Some(1));
        assert_eq!(map.get("DELEGATECALL").unwrap().frame, Some(FrameContext::Caller));
        assert_eq!(map.get("SSTORE").unwrap().kind, RuleKind::StorageWrite);
        assert!(map.get("ADD").is_none());
    }

    #[test]
    fn rejects_address_rule_without_operand() {
        assert!(OpcodeMap::from_json(r#"{"BALANCE": {"kind": "address"}}"#).is_err());
        assert!(OpcodeMap::from_json(r#"{"CREATE": {"kind": "create", "stack": 0}}"#).is_err());
        assert!(OpcodeMap::from_json(r#"{"X": {"kind": "address", "stack": 0, "extra": 1}}"#).is_err());
    }
}
