//! Gas-optimal access lists and access-list gas deltas.
//!
//! Under a fixed trace, each touched account contributes independently to the
//! total: listing account `A` with keys `K` changes gas by
//! `-(address_gain(A) + |K| * key_saving)`. The optimum therefore decides each
//! account separately and lists it only when that sum is strictly positive.

use serde::{Deserialize, Serialize};

use crate::access_list::{AccessList, AccessListEntry};
use crate::error::AnalysisError;
use crate::gas::{auto_warm_addresses, charge_accesses, ForkConfig, GasBreakdown, GasSchedule};
use crate::trace::{touched_accounts, AccessTrace, TouchedAccount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TalDelta {
    /// `total(with list) - total(empty list)`; negative is a saving.
    pub vs_empty: i64,
    /// `vs_empty` times the effective gas price.
    pub vs_empty_wei: i128,
    pub breakdown_with: GasBreakdown,
    pub breakdown_without: GasBreakdown,
}

/// Gas saved by listing an account on its own (no keys). Negative when the
/// entry buys nothing: the account is auto-warm, or no event prices it.
pub(crate) fn address_gain(schedule: &GasSchedule, auto_warm: bool, has_address_event: bool) -> i64 {
    if auto_warm || !has_address_event {
        -(schedule.access_list_address_cost as i64)
    } else {
        schedule.address_entry_saving()
    }
}

/// Best entry for one touched account, or `None` when no entry saves gas.
fn best_entry(schedule: &GasSchedule, auto_warm: bool, account: &TouchedAccount) -> Option<AccessListEntry> {
    let key_saving = schedule.key_entry_saving();
    let keys = if key_saving > 0 {
        account.keys.clone()
    } else {
        Vec::new()
    };
    let gain = address_gain(schedule, auto_warm, account.has_address_event) + key_saving * keys.len() as i64;
    (gain > 0).then(|| AccessListEntry::new(account.address, keys))
}

/// The gas-minimal access list for `trace`, in first-touch order with no
/// duplicates and no untouched atoms.
///
/// An auto-warm account is listed only when its keys pay for the address
/// charge strictly; at exactly break-even it is left out.
pub fn optimal_tal(
    trace: &AccessTrace,
    schedule: &GasSchedule,
    fork: &ForkConfig,
) -> Result<AccessList, AnalysisError> {
    schedule.require_access_lists()?;
    trace.check()?;
    let warm = auto_warm_addresses(&trace.ctx, fork).accessed_addresses;
    Ok(touched_accounts(trace)
        .iter()
        .filter_map(|acct| best_entry(schedule, warm.contains(&acct.address), acct))
        .collect())
}

pub fn tal_delta(
    trace: &AccessTrace,
    tal: &AccessList,
    schedule: &GasSchedule,
    fork: &ForkConfig,
) -> Result<TalDelta, AnalysisError> {
    schedule.require_access_lists()?;
    let breakdown_with = charge_accesses(trace, tal, schedule, fork)?;
    let breakdown_without = charge_accesses(trace, &AccessList::default(), schedule, fork)?;
    let vs_empty = breakdown_with.total as i64 - breakdown_without.total as i64;
    Ok(TalDelta {
        vs_empty,
        vs_empty_wei: vs_empty as i128 * trace.ctx.effective_gas_price as i128,
        breakdown_with,
        breakdown_without,
    })
}

/// Builds the optimal list on `gen_trace` and prices it on `exec_trace`.
///
/// With a start-of-block trace as `gen_trace` and the intra-block trace as
/// `exec_trace` this is what a user who simulates on the parent state pays.
pub fn cross_state_delta(
    gen_trace: &AccessTrace,
    exec_trace: &AccessTrace,
    schedule: &GasSchedule,
    fork: &ForkConfig,
) -> Result<TalDelta, AnalysisError> {
    if gen_trace.ctx.tx_hash != exec_trace.ctx.tx_hash {
        return Err(AnalysisError::TxMismatch {
            generated: gen_trace.ctx.tx_hash,
            executed: exec_trace.ctx.tx_hash,
        });
    }
    let tal = optimal_tal(gen_trace, schedule, fork)?;
    tal_delta(exec_trace, &tal, schedule, fork)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::ScheduleName;
    use crate::primitives::{Address, StorageKey, TxHash};
    use crate::trace::{AccessEvent, StateLabel, TxContext};

    fn a(n: u64) -> Address {
        Address::from_ordinal(n)
    }
    fn k(n: u64) -> StorageKey {
        StorageKey::from_low_u64(n)
    }

    const SENDER: u64 = 0x5e00;
    const RECIPIENT: u64 = 0x7e00;
    const EXT_A: u64 = 0xa000;
    const EXT_B: u64 = 0xb000;

    fn ctx() -> TxContext {
        let mut c = TxContext::call(TxHash::from_low_u64(1), a(SENDER), a(RECIPIENT), a(0xc000));
        c.effective_gas_price = 30_000_000_000;
        c
    }

    fn trace(events: Vec<AccessEvent>) -> AccessTrace {
        AccessTrace::new(ctx(), events, StateLabel::Ibs).unwrap()
    }

    fn berlin() -> (GasSchedule, ForkConfig) {
        (GasSchedule::berlin(), ForkConfig::default())
    }

    fn one_external() -> AccessTrace {
        trace(vec![
            AccessEvent::address(0, a(EXT_A)),
            AccessEvent::read(1, a(EXT_A), k(1)),
        ])
    }

    fn recipient_with_keys(n: u64) -> AccessTrace {
        trace((0..n).map(|i| AccessEvent::read(i, a(RECIPIENT), k(i))).collect())
    }

    #[test]
    fn external_account_and_slot_are_listed() {
        let (s, f) = berlin();
        let tal = optimal_tal(&one_external(), &s, &f).unwrap();
        assert_eq!(tal, AccessList::new(vec![AccessListEntry::new(a(EXT_A), vec![k(1)])]));
    }

    #[test]
    fn sender_balance_only_gives_empty_list() {
        let (s, f) = berlin();
        let t = trace(vec![AccessEvent::address(0, a(SENDER))]);
        assert!(optimal_tal(&t, &s, &f).unwrap().is_empty());
    }

    #[test]
    fn recipient_break_even() {
        let (s, f) = berlin();
        let tal = optimal_tal(&recipient_with_keys(25), &s, &f).unwrap();
        assert_eq!(tal.len(), 1);
        assert_eq!(tal.0[0].storage_keys.len(), 25);
        assert!(optimal_tal(&recipient_with_keys(24), &s, &f).unwrap().is_empty());
    }

    #[test]
    fn slot_only_account_follows_break_even() {
        // No AddressAccess event prices the account, so it behaves like a warm one.
        let (s, f) = berlin();
        let t = trace((0..3).map(|i| AccessEvent::read(i, a(EXT_A), k(i))).collect());
        assert!(optimal_tal(&t, &s, &f).unwrap().is_empty());
    }

    #[test]
    fn delta_examples() {
        let (s, f) = berlin();
        let t = one_external();
        let tal = optimal_tal(&t, &s, &f).unwrap();
        let d = tal_delta(&t, &tal, &s, &f).unwrap();
        assert_eq!(d.vs_empty, -200);
        assert_eq!(d.vs_empty_wei, -200 * 30_000_000_000);
        assert_eq!(
            d.vs_empty,
            d.breakdown_with.total as i64 - d.breakdown_without.total as i64
        );

        assert_eq!(tal_delta(&t, &AccessList::default(), &s, &f).unwrap().vs_empty, 0);

        let sender_only = AccessList::new(vec![AccessListEntry::new(a(SENDER), vec![])]);
        assert_eq!(tal_delta(&t, &sender_only, &s, &f).unwrap().vs_empty, 2400);
    }

    #[test]
    fn pre_berlin_is_rejected() {
        let s = GasSchedule::preset(ScheduleName::Eip150);
        let f = ForkConfig::default();
        assert!(matches!(
            optimal_tal(&one_external(), &s, &f),
            Err(AnalysisError::UnsupportedSchedule { .. })
        ));
        assert!(matches!(
            tal_delta(&one_external(), &AccessList::default(), &s, &f),
            Err(AnalysisError::UnsupportedSchedule { .. })
        ));
    }

    #[test]
    fn cross_state_same_trace_is_ideal() {
        let (s, f) = berlin();
        let t = one_external();
        let ideal = tal_delta(&t, &optimal_tal(&t, &s, &f).unwrap(), &s, &f).unwrap();
        assert_eq!(cross_state_delta(&t, &t, &s, &f).unwrap(), ideal);
    }

    #[test]
    fn cross_state_superfluous_address() {
        let (s, f) = berlin();
        let exec = one_external();
        let mut gen = exec.clone();
        gen.events.push(AccessEvent::address(2, a(EXT_B)));
        assert_eq!(cross_state_delta(&gen, &exec, &s, &f).unwrap().vs_empty, -200 + 2400);
    }

    #[test]
    fn cross_state_missed_key_costs_100() {
        let (s, f) = berlin();
        let gen = one_external();
        let mut exec = gen.clone();
        exec.events.push(AccessEvent::read(2, a(EXT_A), k(2)));
        let ideal = cross_state_delta(&exec, &exec, &s, &f).unwrap().vs_empty;
        let stale = cross_state_delta(&gen, &exec, &s, &f).unwrap().vs_empty;
        assert_eq!(stale - ideal, 100);
    }

    #[test]
    fn cross_state_requires_same_tx() {
        let (s, f) = berlin();
        let t = one_external();
        let mut other = t.clone();
        other.ctx.tx_hash = TxHash::from_low_u64(2);
        assert!(matches!(
            cross_state_delta(&t, &other, &s, &f),
            Err(AnalysisError::TxMismatch { .. })
        ));
    }

    #[test]
    fn custom_schedule_without_key_saving_lists_bare_addresses() {
        let (mut s, f) = berlin();
        s.access_list_storage_key_cost = 2000;
        let tal = optimal_tal(&one_external(), &s, &f).unwrap();
        assert_eq!(tal, AccessList::new(vec![AccessListEntry::new(a(EXT_A), vec![])]));
    }
}
