//! Transaction state-access traces.
//!
//! A trace is the ordered list of state accesses one transaction performed,
//! together with the context that decides which addresses are warm before the
//! first opcode runs. Traces enter the crate as [`RawAccessTrace`] (strings
//! straight off the wire) and become [`AccessTrace`] only through
//! [`validate_trace`].

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::gas::WarmSets;
use crate::primitives::{Address, StorageKey, TxHash};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessKind {
    /// `*CALL`, `EXT*`, `BALANCE` and `SELFDESTRUCT` touching an account.
    AddressAccess,
    StorageRead,
    StorageWrite,
}

impl AccessKind {
    pub fn is_storage(self) -> bool {
        !matches!(self, AccessKind::AddressAccess)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccessEvent {
    pub seq: u64,
    pub kind: AccessKind,
    pub address: Address,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<StorageKey>,
}

impl AccessEvent {
    pub fn address(seq: u64, address: Address) -> Self {
        Self {
            seq,
            kind: AccessKind::AddressAccess,
            address,
            key: None,
        }
    }

    pub fn read(seq: u64, address: Address, key: StorageKey) -> Self {
        Self {
            seq,
            kind: AccessKind::StorageRead,
            address,
            key: Some(key),
        }
    }

    pub fn write(seq: u64, address: Address, key: StorageKey) -> Self {
        Self {
            seq,
            kind: AccessKind::StorageWrite,
            address,
            key: Some(key),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxContext {
    pub tx_hash: TxHash,
    pub sender: Address,
    /// Absent for contract creation.
    pub recipient: Option<Address>,
    pub block_producer: Address,
    pub block_number: u64,
    pub tx_index: u64,
    /// Unix seconds; used only for per-day adoption statistics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_timestamp: Option<u64>,
    #[serde(default)]
    pub created_contracts: Vec<Address>,
    /// Wei paid per gas unit.
    pub effective_gas_price: u64,
}

impl TxContext {
    /// Minimal context for a call from `sender` to `recipient`.
    pub fn call(tx_hash: TxHash, sender: Address, recipient: Address, block_producer: Address) -> Self {
        Self {
            tx_hash,
            sender,
            recipient: Some(recipient),
            block_producer,
            block_number: 0,
            tx_index: 0,
            block_timestamp: None,
            created_contracts: Vec::new(),
            effective_gas_price: 0,
        }
    }

    pub fn is_creation(&self) -> bool {
        self.recipient.is_none()
    }
}

/// Which state a trace was recorded against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateLabel {
    /// Start of block: executed on the parent block's post-state.
    #[serde(rename = "SOB")]
    Sob,
    /// Intra-block state: executed at the transaction's real position.
    #[serde(rename = "IBS")]
    Ibs,
    Declared,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAccessTrace")]
pub struct AccessTrace {
    pub ctx: TxContext,
    pub events: Vec<AccessEvent>,
    pub state_label: StateLabel,
}

impl AccessTrace {
    pub fn new(ctx: TxContext, events: Vec<AccessEvent>, state_label: StateLabel) -> Result<Self, TraceError> {
        let trace = Self {
            ctx,
            events,
            state_label,
        };
        trace.check()?;
        Ok(trace)
    }

    /// Re-checks the event invariants of an already-typed trace.
    pub fn check(&self) -> Result<(), TraceError> {
        let mut prev: Option<u64> = None;
        for (index, ev) in self.events.iter().enumerate() {
            if prev.is_some_and(|p| ev.seq <= p) {
                return Err(TraceError::NonMonotonicSeq { index });
            }
            prev = Some(ev.seq);
            match (ev.kind.is_storage(), ev.key.is_some()) {
                (true, false) => return Err(TraceError::MissingKey { index }),
                (false, true) => return Err(TraceError::UnexpectedKey { index }),
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("event {index}: seq does not increase")]
    NonMonotonicSeq { index: usize },
    #[error("event {index}: storage access without a key")]
    MissingKey { index: usize },
    #[error("event {index}: address access carries a key")]
    UnexpectedKey { index: usize },
    #[error("event {index}: malformed address")]
    MalformedAddress { index: usize },
    #[error("event {index}: malformed storage key")]
    MalformedKey { index: usize },
    #[error("context field `{field}` is malformed")]
    MalformedContext { field: &'static str },
}

/// Wire form of a trace, before any field is parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAccessTrace {
    pub ctx: RawTxContext,
    pub events: Vec<RawAccessEvent>,
    pub state_label: StateLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTxContext {
    pub tx_hash: String,
    pub sender: String,
    #[serde(default)]
    pub recipient: Option<String>,
    pub block_producer: String,
    pub block_number: u64,
    pub tx_index: u64,
    #[serde(default)]
    pub block_timestamp: Option<u64>,
    #[serde(default)]
    pub created_contracts: Vec<String>,
    pub effective_gas_price: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAccessEvent {
    pub seq: u64,
    pub kind: AccessKind,
    pub address: String,
    #[serde(default)]
    pub key: Option<String>,
}

impl TryFrom<RawAccessTrace> for AccessTrace {
    type Error = TraceError;

    fn try_from(raw: RawAccessTrace) -> Result<Self, Self::Error> {
        validate_trace(raw)
    }
}

impl std::fmt::Display for StateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StateLabel::Sob => "SOB",
            StateLabel::Ibs => "IBS",
            StateLabel::Declared => "Declared",
            StateLabel::Other => "Other",
        })
    }
}

fn parse_ctx(raw: RawTxContext) -> Result<TxContext, TraceError> {
    fn field<T: std::str::FromStr>(s: &str, field: &'static str) -> Result<T, TraceError> {
        s.parse().map_err(|_| TraceError::MalformedContext { field })
    }
    Ok(TxContext {
        tx_hash: field(&raw.tx_hash, "tx_hash")?,
        sender: field(&raw.sender, "sender")?,
        recipient: raw.recipient.as_deref().map(|r| field(r, "recipient")).transpose()?,
        block_producer: field(&raw.block_producer, "block_producer")?,
        block_number: raw.block_number,
        tx_index: raw.tx_index,
        block_timestamp: raw.block_timestamp,
        created_contracts: raw
            .created_contracts
            .iter()
            .map(|c| field(c, "created_contracts"))
            .collect::<Result<_, _>>()?,
        effective_gas_price: raw.effective_gas_price,
    })
}

/// Parses and checks every field of a raw trace. Errors name the offending
/// event index.
pub fn validate_trace(raw: RawAccessTrace) -> Result<AccessTrace, TraceError> {
    let ctx = parse_ctx(raw.ctx)?;
    let mut events = Vec::with_capacity(raw.events.len());
    let mut prev: Option<u64> = None;
    for (index, ev) in raw.events.into_iter().enumerate() {
        if prev.is_some_and(|p| ev.seq <= p) {
            return Err(TraceError::NonMonotonicSeq { index });
        }
        prev = Some(ev.seq);
        let address: Address = ev.address.parse().map_err(|_| TraceError::MalformedAddress { index })?;
        let key = match (ev.kind.is_storage(), ev.key) {
            (true, None) => return Err(TraceError::MissingKey { index }),
            (false, Some(_)) => return Err(TraceError::UnexpectedKey { index }),
            (true, Some(k)) => Some(k.parse().map_err(|_| TraceError::MalformedKey { index })?),
            (false, None) => None,
        };
        events.push(AccessEvent {
            seq: ev.seq,
            kind: ev.kind,
            address,
            key,
        });
    }
    Ok(AccessTrace {
        ctx,
        events,
        state_label: raw.state_label,
    })
}

/// Distinct addresses and `(address, key)` pairs touched by the trace. A
/// storage access also counts as touching its address.
pub fn first_touch_sets(trace: &AccessTrace) -> WarmSets {
    let mut sets = WarmSets::default();
    for ev in &trace.events {
        sets.accessed_addresses.insert(ev.address);
        if let Some(key) = ev.key {
            sets.accessed_storage_keys.insert((ev.address, key));
        }
    }
    sets
}

/// One touched account, with the keys touched under it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TouchedAccount {
    pub address: Address,
    /// Whether at least one `AddressAccess` event names this account. Only
    /// those events are priced as account accesses.
    pub has_address_event: bool,
    /// Distinct keys, in first-touch order.
    pub keys: Vec<StorageKey>,
}

/// Touched accounts in first-touch order.
pub fn touched_accounts(trace: &AccessTrace) -> Vec<TouchedAccount> {
    let mut by_address: IndexMap<Address, (bool, IndexMap<StorageKey, ()>)> = IndexMap::new();
    for ev in &trace.events {
        let slot = by_address.entry(ev.address).or_default();
        match ev.key {
            Some(key) => {
                slot.1.insert(key, ());
            }
            None => slot.0 = true,
        }
    }
    by_address
        .into_iter()
        .map(|(address, (has_address_event, keys))| TouchedAccount {
            address,
            has_address_event,
            keys: keys.into_keys().collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(n: u64) -> Address {
        Address::from_ordinal(n)
    }
    fn k(n: u64) -> StorageKey {
        StorageKey::from_low_u64(n)
    }

    fn raw_ctx() -> RawTxContext {
        RawTxContext {
            tx_hash: TxHash::from_low_u64(1).to_string(),
            sender: a(0x5e).to_string(),
            recipient: Some(a(0x7e).to_string()),
            block_producer: a(0xc0).to_string(),
            block_number: 1,
            tx_index: 0,
            block_timestamp: None,
            created_contracts: vec![],
            effective_gas_price: 1,
        }
    }

    fn raw_event(seq: u64, kind: AccessKind, key: Option<StorageKey>) -> RawAccessEvent {
        RawAccessEvent {
            seq,
            kind,
            address: a(0xa).to_string(),
            key: key.map(|k| k.to_string()),
        }
    }

    fn raw(events: Vec<RawAccessEvent>) -> RawAccessTrace {
        RawAccessTrace {
            ctx: raw_ctx(),
            events,
            state_label: StateLabel::Ibs,
        }
    }

    #[test]
    fn well_formed_trace_passes_through() {
        let t = validate_trace(raw(vec![
            raw_event(1, AccessKind::AddressAccess, None),
            raw_event(2, AccessKind::StorageRead, Some(k(1))),
        ]))
        .unwrap();
        assert_eq!(
            t.events,
            vec![AccessEvent::address(1, a(0xa)), AccessEvent::read(2, a(0xa), k(1))]
        );
        assert_eq!(t.ctx.recipient, Some(a(0x7e)));
    }

    #[test]
    fn repeated_seq_is_rejected_at_second_event() {
        let err = validate_trace(raw(vec![
            raw_event(1, AccessKind::AddressAccess, None),
            raw_event(1, AccessKind::AddressAccess, None),
        ]))
        .unwrap_err();
        assert_eq!(err, TraceError::NonMonotonicSeq { index: 1 });
    }

    #[test]
    fn storage_read_without_key() {
        let err = validate_trace(raw(vec![raw_event(0, AccessKind::StorageRead, None)])).unwrap_err();
        assert_eq!(err, TraceError::MissingKey { index: 0 });
    }

    #[test]
    fn address_access_with_key() {
        let err = validate_trace(raw(vec![raw_event(0, AccessKind::AddressAccess, Some(k(1)))])).unwrap_err();
        assert_eq!(err, TraceError::UnexpectedKey { index: 0 });
    }

    #[test]
    fn malformed_address_and_key_name_the_event() {
        let mut bad = raw_event(3, AccessKind::AddressAccess, None);
        bad.address = "0x1234".into();
        let err = validate_trace(raw(vec![raw_event(1, AccessKind::AddressAccess, None), bad])).unwrap_err();
        assert_eq!(err, TraceError::MalformedAddress { index: 1 });

        let mut bad = raw_event(0, AccessKind::StorageWrite, None);
        bad.key = Some("0xnothex".into());
        assert_eq!(
            validate_trace(raw(vec![bad])).unwrap_err(),
            TraceError::MalformedKey { index: 0 }
        );
    }

    #[test]
    fn malformed_context() {
        let mut r = raw(vec![]);
        r.ctx.sender = "bob".into();
        assert_eq!(
            validate_trace(r).unwrap_err(),
            TraceError::MalformedContext { field: "sender" }
        );
    }

    #[test]
    fn first_touch_sets_examples() {
        let ctx = validate_trace(raw(vec![])).unwrap().ctx;
        let empty = AccessTrace::new(ctx.clone(), vec![], StateLabel::Ibs).unwrap();
        let sets = first_touch_sets(&empty);
        assert!(sets.accessed_addresses.is_empty() && sets.accessed_storage_keys.is_empty());

        let t = AccessTrace::new(
            ctx.clone(),
            vec![
                AccessEvent::address(0, a(0xa)),
                AccessEvent::read(1, a(0xa), k(1)),
                AccessEvent::write(2, a(0xa), k(1)),
            ],
            StateLabel::Ibs,
        )
        .unwrap();
        let sets = first_touch_sets(&t);
        assert_eq!(
            sets.accessed_addresses.iter().copied().collect::<Vec<_>>(),
            vec![a(0xa)]
        );
        assert_eq!(
            sets.accessed_storage_keys.iter().copied().collect::<Vec<_>>(),
            vec![(a(0xa), k(1))]
        );

        // A storage access alone still touches its account.
        let t = AccessTrace::new(ctx, vec![AccessEvent::read(0, a(0xb), k(2))], StateLabel::Ibs).unwrap();
        let sets = first_touch_sets(&t);
        assert!(sets.accessed_addresses.contains(&a(0xb)));
    }

    #[test]
    fn touched_accounts_keep_first_touch_order() {
        let ctx = validate_trace(raw(vec![])).unwrap().ctx;
        let t = AccessTrace::new(
            ctx,
            vec![
                AccessEvent::read(0, a(2), k(9)),
                AccessEvent::address(1, a(1)),
                AccessEvent::read(2, a(2), k(3)),
                AccessEvent::address(3, a(2)),
                AccessEvent::read(4, a(2), k(9)),
            ],
            StateLabel::Ibs,
        )
        .unwrap();
        let touched = touched_accounts(&t);
        assert_eq!(touched.len(), 2);
        assert_eq!(touched[0].address, a(2));
        assert!(touched[0].has_address_event);
        assert_eq!(touched[0].keys, vec![k(9), k(3)]);
        assert_eq!(touched[1].address, a(1));
        assert!(touched[1].keys.is_empty());
    }

    #[test]
    fn serde_round_trip_goes_through_validation() {
        let line = r#"{"ctx":{"tx_hash":"0x0000000000000000000000000000000000000000000000000000000000000001","sender":"0x000000000000000000000000000000000000005e","recipient":null,"block_producer":"0x00000000000000000000000000000000000000c0","block_number":5,"tx_index":2,"created_contracts":["0x00000000000000000000000000000000000000cc"],"effective_gas_price":7},"events":[{"seq":0,"kind":"storage_write","address":"0x00000000000000000000000000000000000000cc","key":"0x0000000000000000000000000000000000000000000000000000000000000000"}],"state_label":"SOB"}"#;
        let t: AccessTrace = serde_json::from_str(line).unwrap();
        assert!(t.ctx.is_creation());
        assert_eq!(t.state_label, StateLabel::Sob);
        assert_eq!(serde_json::to_string(&t).unwrap(), line);

        let bad = line
            .replace(r#""seq":0,"kind":"storage_write""#, r#""seq":0,"kind":"storage_read""#)
            .replace(
                r#","key":"0x0000000000000000000000000000000000000000000000000000000000000000""#,
                "",
            );
        let err = serde_json::from_str::<AccessTrace>(&bad).unwrap_err();
        assert!(err.to_string().contains("without a key"), "{err}");
    }
}
