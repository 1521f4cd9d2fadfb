//! Test support: random traces and reference oracles that share no code with
//! the charging and optimizing paths they check.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::access_list::{AccessList, AccessListEntry};
use crate::gas::{ForkConfig, GasSchedule};
use crate::primitives::{Address, StorageKey, TxHash};
use crate::trace::{AccessEvent, AccessKind, AccessTrace, StateLabel, TxContext};

pub const SENDER: u64 = 0x5e00;
pub const RECIPIENT: u64 = 0x7e00;
pub const PRODUCER: u64 = 0xc000;
pub const CREATED: u64 = 0xcc00;
pub const EXTERNALS: [u64; 4] = [0xa000, 0xb000, 0xd000, 0xe000];

pub fn addr(n: u64) -> Address {
    Address::from_ordinal(n)
}

pub fn key(n: u64) -> StorageKey {
    StorageKey::from_low_u64(n)
}

/// Context for tx `n`: a call from `SENDER` to `RECIPIENT`, or (for
/// `creation`) a deployment of `CREATED`.
pub fn context(n: u64, creation: bool) -> TxContext {
    let mut ctx = TxContext::call(TxHash::from_low_u64(n), addr(SENDER), addr(RECIPIENT), addr(PRODUCER));
    if creation {
        ctx.recipient = None;
        ctx.created_contracts = vec![addr(CREATED)];
    }
    ctx.effective_gas_price = 1_000_000_000 + n;
    ctx
}

/// Every address a generated trace may touch: the auto-warm parties, one
/// precompile and a few plain accounts.
pub fn address_pool() -> Vec<Address> {
    let mut pool: Vec<Address> = [SENDER, RECIPIENT, PRODUCER, CREATED, 3]
        .into_iter()
        .map(addr)
        .collect();
    pool.extend(EXTERNALS.iter().map(|n| addr(*n)));
    pool
}

/// Random trace touching at most `max_atoms` distinct atoms (accounts plus
/// `(account, key)` pairs), with up to `max_events` events.
pub fn random_trace<R: Rng>(rng: &mut R, n: u64, max_atoms: usize, max_events: usize) -> AccessTrace {
    let ctx = context(n, rng.random_bool(0.2));
    let pool = address_pool();
    let mut atoms: Vec<(Address, Option<StorageKey>)> = Vec::new();
    let mut events = Vec::new();
    let target = rng.random_range(0..=max_events);
    let mut seq = 0u64;
    for _ in 0..target * 3 {
        if events.len() == target {
            break;
        }
        let address = *pool.choose(rng).unwrap();
        let kind = match rng.random_range(0..10) {
            0..=3 => AccessKind::AddressAccess,
            4..=7 => AccessKind::StorageRead,
            _ => AccessKind::StorageWrite,
        };
        let k = kind.is_storage().then(|| key(rng.random_range(0..4)));
        let mut new_atoms = Vec::new();
        if !atoms.iter().any(|(a, _)| *a == address) {
            new_atoms.push((address, None));
        }
        if k.is_some() && !atoms.contains(&(address, k)) {
            new_atoms.push((address, k));
        }
        if atoms.len() + new_atoms.len() > max_atoms {
            continue;
        }
        atoms.extend(new_atoms);
        seq += rng.random_range(1..3);
        events.push(AccessEvent {
            seq,
            kind,
            address,
            key: k,
        });
    }
    AccessTrace::new(ctx, events, StateLabel::Ibs).expect("generated trace is well-formed")
}

/// Random declared list over the trace's atoms, untouched accounts and keys,
/// and auto-warm parties; duplicates are possible.
pub fn random_declared<R: Rng>(rng: &mut R, trace: &AccessTrace) -> AccessList {
    let mut pool = address_pool();
    pool.push(addr(0xf000));
    pool.push(addr(7));
    let n = rng.random_range(0..5);
    (0..n)
        .map(|_| {
            let address = *pool.choose(rng).unwrap();
            let touched: Vec<StorageKey> = trace
                .events
                .iter()
                .filter(|e| e.address == address)
                .filter_map(|e| e.key)
                .collect();
            let nk = rng.random_range(0..4);
            let keys = (0..nk)
                .map(|_| match touched.choose(rng) {
                    Some(k) if rng.random_bool(0.7) => *k,
                    _ => key(rng.random_range(0..6)),
                })
                .collect();
            AccessListEntry::new(address, keys)
        })
        .collect()
}

/// Any access list, unrelated to a trace: codec fodder.
pub fn random_tal<R: Rng>(rng: &mut R) -> AccessList {
    let n = rng.random_range(0..6);
    (0..n)
        .map(|_| {
            let mut a = [0u8; 20];
            rng.fill(&mut a[..]);
            let keys = (0..rng.random_range(0..4))
                .map(|_| {
                    let mut k = [0u8; 32];
                    rng.fill(&mut k[..]);
                    StorageKey::new(k)
                })
                .collect();
            AccessListEntry::new(Address::new(a), keys)
        })
        .collect()
}

fn reference_auto_warm(ctx: &TxContext, fork: &ForkConfig) -> Vec<Address> {
    let mut warm = vec![ctx.sender];
    if let Some(r) = ctx.recipient {
        warm.push(r);
    }
    if fork.coinbase_auto_warm {
        warm.push(ctx.block_producer);
    }
    warm.extend(ctx.created_contracts.iter().copied());
    for p in 1..=fork.precompile_max {
        warm.push(Address::from_ordinal(p));
    }
    warm
}

/// Step-by-step recomputation of the total charge using plain vectors.
pub fn reference_total(trace: &AccessTrace, tal: &AccessList, s: &GasSchedule, fork: &ForkConfig) -> u64 {
    let mut total = 0u64;
    let mut warm_accounts = reference_auto_warm(&trace.ctx, fork);
    let mut warm_slots: Vec<(Address, StorageKey)> = Vec::new();
    for e in &tal.0 {
        total += s.access_list_address_cost;
        warm_accounts.push(e.address);
        for k in &e.storage_keys {
            total += s.access_list_storage_key_cost;
            warm_slots.push((e.address, *k));
        }
    }
    for ev in &trace.events {
        match ev.key {
            None => {
                if warm_accounts.contains(&ev.address) {
                    total += s.warm_access_cost;
                } else {
                    total += s.cold_account_access_cost;
                    warm_accounts.push(ev.address);
                }
            }
            Some(k) => {
                if warm_slots.contains(&(ev.address, k)) {
                    total += s.warm_access_cost;
                } else {
                    total += s.cold_sload_cost;
                    warm_slots.push((ev.address, k));
                }
            }
        }
    }
    total
}

/// Minimum of `total(tal) - total(empty)` over every legal list built from the
/// trace's accessed atoms: each subset of atoms, with any chosen key pulling in
/// its account's entry. Exponential; meant for at most ~10 atoms.
pub fn brute_force_min_delta(trace: &AccessTrace, s: &GasSchedule, fork: &ForkConfig) -> i64 {
    let mut accounts: Vec<Address> = Vec::new();
    let mut slots: Vec<(Address, StorageKey)> = Vec::new();
    for ev in &trace.events {
        if !accounts.contains(&ev.address) {
            accounts.push(ev.address);
        }
        if let Some(k) = ev.key {
            if !slots.contains(&(ev.address, k)) {
                slots.push((ev.address, k));
            }
        }
    }
    let n = accounts.len() + slots.len();
    assert!(n <= 16, "too many atoms for enumeration: {n}");
    let base = reference_total(trace, &AccessList::default(), s, fork) as i64;
    let mut best = i64::MAX;
    for mask in 0u32..(1 << n) {
        let chosen = |i: usize| mask & (1 << i) != 0;
        let tal: AccessList = accounts
            .iter()
            .enumerate()
            .filter_map(|(i, a)| {
                let keys: Vec<StorageKey> = slots
                    .iter()
                    .enumerate()
                    .filter(|(j, (sa, _))| sa == a && chosen(accounts.len() + j))
                    .map(|(_, (_, k))| *k)
                    .collect();
                (chosen(i) || !keys.is_empty()).then(|| AccessListEntry::new(*a, keys))
            })
            .collect();
        best = best.min(reference_total(trace, &tal, s, fork) as i64 - base);
    }
    best
}
