//! Gas schedules and the warm/cold charging simulation.
//!
//! Only state-access surcharges and access-list charges are modeled. Intrinsic
//! gas, memory costs, refunds and full `SSTORE` pricing are not: access-list
//! deltas depend on none of them.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::access_list::AccessList;
use crate::error::AnalysisError;
use crate::primitives::{Address, StorageKey};
use crate::trace::{AccessTrace, TxContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleName {
    /// 2014, yellow paper: flat `SLOAD` of 20.
    Frontier,
    /// 2016: flat `SLOAD` of 200.
    Eip150,
    /// 2019: flat `SLOAD` of 800.
    Eip1884,
    /// 2020 onwards: warm/cold pricing with access lists.
    Berlin,
}

impl ScheduleName {
    pub const ALL: [ScheduleName; 4] = [
        ScheduleName::Frontier,
        ScheduleName::Eip150,
        ScheduleName::Eip1884,
        ScheduleName::Berlin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleName::Frontier => "frontier",
            ScheduleName::Eip150 => "eip150",
            ScheduleName::Eip1884 => "eip1884",
            ScheduleName::Berlin => "berlin",
        }
    }
}

impl fmt::Display for ScheduleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleName {
    type Err = ScheduleConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScheduleName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| ScheduleConfigError::UnknownSchedule(s.to_string()))
    }
}

/// Integer cost constants.
///
/// Pre-berlin schedules have no warm/cold split: every access pays the flat
/// cost stored in `cold_account_access_cost` / `cold_sload_cost`, and the
/// warm and access-list fields are zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasSchedule {
    pub name: ScheduleName,
    pub cold_account_access_cost: u64,
    pub warm_access_cost: u64,
    pub cold_sload_cost: u64,
    pub access_list_address_cost: u64,
    pub access_list_storage_key_cost: u64,
}

impl Default for GasSchedule {
    fn default() -> Self {
        Self::berlin()
    }
}

impl GasSchedule {
    pub fn berlin() -> Self {
        Self {
            name: ScheduleName::Berlin,
            cold_account_access_cost: 2600,
            warm_access_cost: 100,
            cold_sload_cost: 2100,
            access_list_address_cost: 2400,
            access_list_storage_key_cost: 1900,
        }
    }

    fn flat(name: ScheduleName, account: u64, sload: u64) -> Self {
        Self {
            name,
            cold_account_access_cost: account,
            warm_access_cost: 0,
            cold_sload_cost: sload,
            access_list_address_cost: 0,
            access_list_storage_key_cost: 0,
        }
    }

    /// Named preset. Account-access costs of the flat schedules are the
    /// `BALANCE` prices of their era.
    pub fn preset(name: ScheduleName) -> Self {
        match name {
            ScheduleName::Frontier => Self::flat(name, 20, 20),
            ScheduleName::Eip150 => Self::flat(name, 400, 200),
            ScheduleName::Eip1884 => Self::flat(name, 700, 800),
            ScheduleName::Berlin => Self::berlin(),
        }
    }

    pub fn supports_access_lists(&self) -> bool {
        self.name == ScheduleName::Berlin
    }

    /// The single `SLOAD` price of a pre-berlin schedule.
    pub fn flat_sload_cost(&self) -> Option<u64> {
        (!self.supports_access_lists()).then_some(self.cold_sload_cost)
    }

    /// Net gas saved by listing an account whose first access would be cold.
    pub fn address_entry_saving(&self) -> i64 {
        self.cold_account_access_cost as i64 - self.access_list_address_cost as i64 - self.warm_access_cost as i64
    }

    /// Net gas saved by listing a slot whose first access would be cold.
    pub fn key_entry_saving(&self) -> i64 {
        self.cold_sload_cost as i64 - self.access_list_storage_key_cost as i64 - self.warm_access_cost as i64
    }

    pub(crate) fn require_access_lists(&self) -> Result<(), AnalysisError> {
        if self.supports_access_lists() {
            Ok(())
        } else {
            Err(AnalysisError::UnsupportedSchedule {
                name: self.name.to_string(),
            })
        }
    }

    /// Applies `key = integer` overrides, one per line. `#` starts a comment.
    ///
    /// Keys are the field names of this struct (except `name`).
    pub fn apply_overrides(&mut self, text: &str) -> Result<(), ScheduleConfigError> {
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ScheduleConfigError::Syntax { line: line_no })?;
            let value: u64 = value
                .trim()
                .parse()
                .map_err(|_| ScheduleConfigError::BadValue { line: line_no })?;
            let slot = match key.trim() {
                "cold_account_access_cost" => &mut self.cold_account_access_cost,
                "warm_access_cost" => &mut self.warm_access_cost,
                "cold_sload_cost" => &mut self.cold_sload_cost,
                "access_list_address_cost" => &mut self.access_list_address_cost,
                "access_list_storage_key_cost" => &mut self.access_list_storage_key_cost,
                other => {
                    return Err(ScheduleConfigError::UnknownKey {
                        line: line_no,
                        key: other.to_string(),
                    })
                }
            };
            *slot = value;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleConfigError {
    #[error("unknown schedule `{0}` (expected frontier, eip150, eip1884 or berlin)")]
    UnknownSchedule(String),
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: value is not a non-negative integer")]
    BadValue { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("precompile_max must be at least 1")]
    PrecompileMax,
}

/// Fork-dependent warmth rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForkConfig {
    /// Block producer warm at transaction start.
    pub coinbase_auto_warm: bool,
    /// Highest precompile address; `0x1..=precompile_max` are warm.
    pub precompile_max: u64,
}

impl Default for ForkConfig {
    fn default() -> Self {
        Self {
            coinbase_auto_warm: true,
            precompile_max: 9,
        }
    }
}

impl ForkConfig {
    pub fn new(coinbase_auto_warm: bool, precompile_max: u64) -> Result<Self, ScheduleConfigError> {
        if precompile_max < 1 {
            return Err(ScheduleConfigError::PrecompileMax);
        }
        Ok(Self {
            coinbase_auto_warm,
            precompile_max,
        })
    }

    pub fn is_precompile(&self, address: &Address) -> bool {
        let b = address.as_bytes();
        b[..12].iter().all(|&x| x == 0) && {
            let n = u64::from_be_bytes(b[12..].try_into().unwrap());
            (1..=self.precompile_max).contains(&n)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WarmSets {
    pub accessed_addresses: BTreeSet<Address>,
    /// Independent of `accessed_addresses`: a warm account does not warm its
    /// slots and vice versa.
    pub accessed_storage_keys: BTreeSet<(Address, StorageKey)>,
}

/// Why an address is warm before the first opcode runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AutoWarmRole {
    Sender,
    Recipient,
    Producer,
    Created,
    Precompile,
}

/// First matching role in the order sender, recipient, producer, created,
/// precompile; `None` if the address starts cold.
pub fn auto_warm_role(ctx: &TxContext, fork: &ForkConfig, address: &Address) -> Option<AutoWarmRole> {
    if *address == ctx.sender {
        Some(AutoWarmRole::Sender)
    } else if ctx.recipient.as_ref() == Some(address) {
        Some(AutoWarmRole::Recipient)
    } else if fork.coinbase_auto_warm && *address == ctx.block_producer {
        Some(AutoWarmRole::Producer)
    } else if ctx.created_contracts.contains(address) {
        Some(AutoWarmRole::Created)
    } else if fork.is_precompile(address) {
        Some(AutoWarmRole::Precompile)
    } else {
        None
    }
}

/// Addresses warm at transaction start without access-list payment. The
/// storage-key set is always empty.
pub fn auto_warm_addresses(ctx: &TxContext, fork: &ForkConfig) -> WarmSets {
    let mut sets = WarmSets::default();
    let a = &mut sets.accessed_addresses;
    a.insert(ctx.sender);
    a.extend(ctx.recipient);
    if fork.coinbase_auto_warm {
        a.insert(ctx.block_producer);
    }
    a.extend(ctx.created_contracts.iter().copied());
    a.extend((1..=fork.precompile_max).map(Address::from_ordinal));
    sets
}

/// Upfront charge of an access list. Duplicates are charged per occurrence.
pub fn tal_upfront_cost(tal: &AccessList, schedule: &GasSchedule) -> Result<u64, AnalysisError> {
    schedule.require_access_lists()?;
    Ok(tal
        .iter()
        .map(|e| {
            schedule.access_list_address_cost + e.storage_keys.len() as u64 * schedule.access_list_storage_key_cost
        })
        .sum())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasBreakdown {
    pub upfront_tal_cost: u64,
    pub access_gas: u64,
    pub total: u64,
    pub cold_address_events: u64,
    pub warm_address_events: u64,
    pub cold_slot_events: u64,
    pub warm_slot_events: u64,
}

/// Walks the trace once, pricing each access by whether its target is
/// already warm.
///
/// The warm sets start as the auto-warm addresses plus every access-list
/// entry. Reads and writes pay the same cold/warm surcharge. A storage access
/// does not price the enclosing account; only `AddressAccess` events do.
///
/// Pre-berlin schedules accept only an empty list and charge the flat cost
/// for every access (counted as cold events).
pub fn charge_accesses(
    trace: &AccessTrace,
    tal: &AccessList,
    schedule: &GasSchedule,
    fork: &ForkConfig,
) -> Result<GasBreakdown, AnalysisError> {
    trace.check()?;
    let warm_cold = schedule.supports_access_lists();
    let upfront_tal_cost = if tal.is_empty() {
        0
    } else {
        tal_upfront_cost(tal, schedule)?
    };

    let auto = auto_warm_addresses(&trace.ctx, fork);
    let mut warm_addresses: HashSet<Address> = auto.accessed_addresses.into_iter().collect();
    let mut warm_slots: HashSet<(Address, StorageKey)> = HashSet::new();
    for entry in tal {
        warm_addresses.insert(entry.address);
        warm_slots.extend(entry.storage_keys.iter().map(|k| (entry.address, *k)));
    }

    let mut b = GasBreakdown {
        upfront_tal_cost,
        ..Default::default()
    };
    for ev in &trace.events {
        let first_touch = match ev.key {
            None => warm_addresses.insert(ev.address),
            Some(key) => warm_slots.insert((ev.address, key)),
        };
        let cold = first_touch || !warm_cold;
        match (ev.key.is_some(), cold) {
            (false, true) => b.cold_address_events += 1,
            (false, false) => b.warm_address_events += 1,
            (true, true) => b.cold_slot_events += 1,
            (true, false) => b.warm_slot_events += 1,
        }
    }
    b.access_gas = b.cold_address_events * schedule.cold_account_access_cost
        + b.warm_address_events * schedule.warm_access_cost
        + b.cold_slot_events * schedule.cold_sload_cost
        + b.warm_slot_events * schedule.warm_access_cost;
    b.total = b.upfront_tal_cost + b.access_gas;
    Ok(b)
}
