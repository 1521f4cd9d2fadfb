//! Tracer output to [`AccessTrace`].
//!
//! Every document either normalizes completely or fails with
//! [`IngestError::Normalization`] carrying the raw document.

use serde_json::Value;
use tal_core::{AccessEvent, AccessKind, AccessTrace, Address, StateLabel, StorageKey, TxContext};

use crate::opcodes::{FrameContext, OpcodeMap, RuleKind};
use crate::{IngestError, RawTraceDocument};

fn fail(doc: &RawTraceDocument, message: impl Into<String>) -> IngestError {
    IngestError::Normalization {
        message: message.into(),
        raw: Box::new(doc.clone()),
    }
}

fn finish(
    ctx: TxContext,
    events: Vec<AccessEvent>,
    label: StateLabel,
    doc: &RawTraceDocument,
) -> Result<AccessTrace, IngestError> {
    AccessTrace::new(ctx, events, label).map_err(|e| fail(doc, e.to_string()))
}

/// Normalizes `prestateTracer` output: a map from every touched account to its
/// pre-state, including the storage slots read or written.
///
/// The tracer reports neither order nor read/write direction, so each account
/// yields one address event followed by one read per slot, in ascending
/// order. Accounts the transaction itself touches (sender, recipient,
/// producer, created contracts) get no address event.
pub fn normalize_prestate(
    ctx: TxContext,
    label: StateLabel,
    doc: &RawTraceDocument,
) -> Result<AccessTrace, IngestError> {
    let accounts = doc
        .payload
        .as_object()
        .ok_or_else(|| fail(doc, "payload is not an object"))?;
    let mut parsed: Vec<(Address, Vec<StorageKey>)> = Vec::with_capacity(accounts.len());
    for (addr, state) in accounts {
        let address: Address = addr.parse().map_err(|e| fail(doc, format!("account `{addr}`: {e}")))?;
        let mut keys = match state.get("storage") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Object(slots)) => slots
                .keys()
                .map(|k| {
                    k.parse::<StorageKey>()
                        .map_err(|e| fail(doc, format!("slot `{k}` of {address}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?,
            Some(_) => return Err(fail(doc, format!("storage of {address} is not an object"))),
        };
        keys.sort();
        parsed.push((address, keys));
    }
    parsed.sort_by_key(|(a, _)| *a);

    let implicit = |a: &Address| {
        *a == ctx.sender || ctx.recipient == Some(*a) || *a == ctx.block_producer || ctx.created_contracts.contains(a)
    };
    let mut events = Vec::new();
    let mut seq = 0u64;
    for (address, keys) in parsed {
        if !implicit(&address) {
            events.push(AccessEvent::address(seq, address));
            seq += 1;
        }
        for key in keys {
            events.push(AccessEvent::read(seq, address, key));
            seq += 1;
        }
    }
    finish(ctx, events, label, doc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Known(Address),
    /// Address of the n-th create frame, learned when it returns.
    Pending(usize),
}

#[derive(Debug, Clone, Copy)]
enum Entry {
    Call(Target),
    Create,
}

struct Frame {
    storage: Target,
    /// Pending id and first event index of a create frame.
    create: Option<(usize, usize)>,
}

struct RawEvent {
    seq: u64,
    kind: AccessKind,
    target: Target,
    key: Option<StorageKey>,
}

fn stack_word(stack: Option<&Vec<Value>>, from_top: usize) -> Option<&str> {
    let stack = stack?;
    let i = stack.len().checked_sub(1 + from_top)?;
    stack[i].as_str()
}

/// Normalizes default struct-log tracer output (`structLogs` with stacks)
/// through `map`. Addresses of contracts created during execution are added
/// to `ctx.created_contracts`; events of failed creations are dropped.
pub fn normalize_struct_logs(
    mut ctx: TxContext,
    label: StateLabel,
    doc: &RawTraceDocument,
    map: &OpcodeMap,
) -> Result<AccessTrace, IngestError> {
    let logs = doc
        .payload
        .get("structLogs")
        .and_then(Value::as_array)
        .ok_or_else(|| fail(doc, "missing `structLogs` array"))?;
    let top = match (ctx.recipient, ctx.created_contracts.first()) {
        (Some(r), _) => r,
        (None, Some(c)) => *c,
        (None, None) => return Err(fail(doc, "creation without a contract address")),
    };

    let mut frames = vec![Frame {
        storage: Target::Known(top),
        create: None,
    }];
    let mut resolved: Vec<Option<Address>> = Vec::new();
    let mut raw: Vec<RawEvent> = Vec::new();
    let mut entry: Option<Entry> = None;
    let mut prev_depth: Option<u64> = None;

    for (i, log) in logs.iter().enumerate() {
        let op = log
            .get("op")
            .and_then(Value::as_str)
            .ok_or_else(|| fail(doc, format!("log {i}: missing `op`")))?;
        let depth = log
            .get("depth")
            .and_then(Value::as_u64)
            .ok_or_else(|| fail(doc, format!("log {i}: missing `depth`")))?;
        let stack = log.get("stack").and_then(Value::as_array);
        let word = |from_top: usize| {
            stack_word(stack, from_top)
                .ok_or_else(|| fail(doc, format!("log {i} ({op}): stack operand {from_top} missing")))
        };

        if let Some(prev) = prev_depth {
            let pending = entry.take();
            if depth == prev + 1 {
                match pending {
                    Some(Entry::Call(target)) => frames.push(Frame {
                        storage: target,
                        create: None,
                    }),
                    Some(Entry::Create) => {
                        resolved.push(None);
                        let id = resolved.len() - 1;
                        frames.push(Frame {
                            storage: Target::Pending(id),
                            create: Some((id, raw.len())),
                        });
                    }
                    None => return Err(fail(doc, format!("log {i}: depth increased without a call"))),
                }
            } else if depth + 1 == prev {
                let frame = frames.pop().filter(|_| !frames.is_empty());
                let frame = frame.ok_or_else(|| fail(doc, format!("log {i}: return below the top frame")))?;
                if let Some((id, start)) = frame.create {
                    let created = Address::from_word_hex(word(0)?).map_err(|e| fail(doc, format!("log {i}: {e}")))?;
                    if created == Address::default() {
                        raw.truncate(start);
                    } else {
                        resolved[id] = Some(created);
                        ctx.created_contracts.push(created);
                    }
                }
            } else if depth == prev {
                if let Some(Entry::Create) = pending {
                    // Creation that ran no code: the address is still on the stack.
                    let created = Address::from_word_hex(word(0)?).map_err(|e| fail(doc, format!("log {i}: {e}")))?;
                    if created != Address::default() {
                        ctx.created_contracts.push(created);
                    }
                }
            } else {
                return Err(fail(doc, format!("log {i}: depth jumped from {prev} to {depth}")));
            }
        }
        prev_depth = Some(depth);

        let Some(rule) = map.get(op) else { continue };
        let current = frames.last().expect("top frame is never popped").storage;
        let seq = i as u64;
        match rule.kind {
            RuleKind::Create => entry = Some(Entry::Create),
            RuleKind::Address => {
                let target = Address::from_word_hex(word(rule.stack.unwrap_or(0))?)
                    .map_err(|e| fail(doc, format!("log {i}: {e}")))?;
                raw.push(RawEvent {
                    seq,
                    kind: AccessKind::AddressAccess,
                    target: Target::Known(target),
                    key: None,
                });
                entry = rule.frame.map(|f| {
                    Entry::Call(match f {
                        FrameContext::Target => Target::Known(target),
                        FrameContext::Caller => current,
                    })
                });
            }
            RuleKind::StorageRead | RuleKind::StorageWrite => {
                let key = StorageKey::from_word_hex(word(rule.stack.unwrap_or(0))?)
                    .map_err(|e| fail(doc, format!("log {i}: {e}")))?;
                let kind = if rule.kind == RuleKind::StorageRead {
                    AccessKind::StorageRead
                } else {
                    AccessKind::StorageWrite
                };
                raw.push(RawEvent {
                    seq,
                    kind,
                    target: current,
                    key: Some(key),
                });
            }
        }
    }
    if let Some(open) = frames.iter().find(|f| f.create.is_some()) {
        if let Some((id, _)) = open.create {
            return Err(fail(doc, format!("create frame {id} never returned")));
        }
    }

    let events = raw
        .into_iter()
        .map(|e| {
            let address = match e.target {
                Target::Known(a) => a,
                Target::Pending(id) => resolved[id].ok_or_else(|| fail(doc, "event in an unresolved create frame"))?,
            };
            Ok(AccessEvent {
                seq: e.seq,
                kind: e.kind,
                address,
                key: e.key,
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    finish(ctx, events, label, doc)
}
