//! Auditing declared access lists against what a transaction actually did.
//!
//! Every defect carries the gas it costs relative to the optimal list, so the
//! `regret` of all findings in a report sums to the report's total regret.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::access_list::AccessList;
use crate::error::AnalysisError;
use crate::gas::{auto_warm_role, AutoWarmRole, ForkConfig, GasSchedule};
use crate::optimizer::{address_gain, optimal_tal, tal_delta};
use crate::primitives::{Address, StorageKey, TxHash};
use crate::trace::{touched_accounts, AccessTrace, TouchedAccount};

/// Why a declared address entry is superfluous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Reason {
    NeverAccessed,
    AutoWarmSender,
    AutoWarmRecipient,
    AutoWarmProducer,
    AutoWarmPrecompile,
    AutoWarmCreated,
    /// Second or later entry for the same address.
    Duplicate,
    /// Touched and not auto-warm, but the entry still costs more than it saves
    /// (e.g. only a few slots of an account no `AddressAccess` event prices).
    Unprofitable,
}

impl From<AutoWarmRole> for Reason {
    fn from(role: AutoWarmRole) -> Self {
        match role {
            AutoWarmRole::Sender => Reason::AutoWarmSender,
            AutoWarmRole::Recipient => Reason::AutoWarmRecipient,
            AutoWarmRole::Producer => Reason::AutoWarmProducer,
            AutoWarmRole::Created => Reason::AutoWarmCreated,
            AutoWarmRole::Precompile => Reason::AutoWarmPrecompile,
        }
    }
}

/// Every kind of finding, as it appears in reports and per-TAL counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DefectKind {
    Address(Reason),
    NeverAccessedKey,
    DuplicateKey,
    MissingAddress,
    MissingKey,
}

impl DefectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DefectKind::Address(r) => match r {
                Reason::NeverAccessed => "NeverAccessed",
                Reason::AutoWarmSender => "AutoWarmSender",
                Reason::AutoWarmRecipient => "AutoWarmRecipient",
                Reason::AutoWarmProducer => "AutoWarmProducer",
                Reason::AutoWarmPrecompile => "AutoWarmPrecompile",
                Reason::AutoWarmCreated => "AutoWarmCreated",
                Reason::Duplicate => "Duplicate",
                Reason::Unprofitable => "Unprofitable",
            },
            DefectKind::NeverAccessedKey => "NeverAccessedKey",
            DefectKind::DuplicateKey => "DuplicateKey",
            DefectKind::MissingAddress => "MissingAddress",
            DefectKind::MissingKey => "MissingKey",
        }
    }
}

impl fmt::Display for DefectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressFinding {
    pub address: Address,
    pub reason: Reason,
    pub regret: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFinding {
    pub address: Address,
    pub key: StorageKey,
    pub regret: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingAddress {
    pub address: Address,
    /// Gain of the bare address entry. Negative for an auto-warm account that
    /// is listed only to enable its keys; the keys' findings make up the rest.
    pub regret: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub tx_hash: TxHash,
    pub superfluous_addresses: Vec<AddressFinding>,
    /// Declared keys the transaction never touched.
    pub superfluous_keys: Vec<KeyFinding>,
    /// Repeated `(address, key)` declarations.
    pub duplicate_keys: Vec<KeyFinding>,
    pub missing_addresses: Vec<MissingAddress>,
    pub missing_keys: Vec<KeyFinding>,
    pub delta_declared: i64,
    pub delta_optimal: i64,
    pub delta_declared_wei: i128,
    pub delta_optimal_wei: i128,
    /// `delta_declared - delta_optimal`, never negative.
    pub regret: i64,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.superfluous_addresses.is_empty()
            && self.superfluous_keys.is_empty()
            && self.duplicate_keys.is_empty()
            && self.missing_addresses.is_empty()
            && self.missing_keys.is_empty()
    }

    /// Gas-imperfect: pays more than the optimal list would.
    pub fn is_imperfect(&self) -> bool {
        self.regret > 0
    }

    /// Distinct defect kinds present.
    pub fn defect_kinds(&self) -> BTreeSet<DefectKind> {
        self.findings().map(|f| f.kind).collect()
    }

    /// All findings as flat rows, in report order.
    pub fn findings(&self) -> impl Iterator<Item = Finding> + '_ {
        let addr = self.superfluous_addresses.iter().map(|f| Finding {
            kind: DefectKind::Address(f.reason),
            address: f.address,
            key: None,
            regret: f.regret,
        });
        let keys = |list: &'_ [KeyFinding], kind: DefectKind| {
            list.iter()
                .map(move |f| Finding {
                    kind,
                    address: f.address,
                    key: Some(f.key),
                    regret: f.regret,
                })
                .collect::<Vec<_>>()
        };
        let missing = self.missing_addresses.iter().map(|f| Finding {
            kind: DefectKind::MissingAddress,
            address: f.address,
            key: None,
            regret: f.regret,
        });
        addr.chain(keys(&self.superfluous_keys, DefectKind::NeverAccessedKey))
            .chain(keys(&self.duplicate_keys, DefectKind::DuplicateKey))
            .chain(missing)
            .chain(keys(&self.missing_keys, DefectKind::MissingKey))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Finding {
    pub kind: DefectKind,
    pub address: Address,
    pub key: Option<StorageKey>,
    pub regret: i64,
}

/// Classifies every entry of `declared` and every omission relative to the
/// optimal list.
///
/// Address entries are tagged with the first applicable reason in the order
/// `Duplicate`, `AutoWarm*`, `NeverAccessed`, `Unprofitable`. An entry for an
/// account the optimal list also includes is never tagged, nor is one whose
/// net effect is exactly zero (a break-even tie).
pub fn audit(
    trace: &AccessTrace,
    declared: &AccessList,
    schedule: &GasSchedule,
    fork: &ForkConfig,
) -> Result<AuditReport, AnalysisError> {
    let optimal = optimal_tal(trace, schedule, fork)?;
    let with_declared = tal_delta(trace, declared, schedule, fork)?;
    let with_optimal = tal_delta(trace, &optimal, schedule, fork)?;

    let ctx = &trace.ctx;
    let touched: HashMap<Address, TouchedAccount> =
        touched_accounts(trace).into_iter().map(|t| (t.address, t)).collect();
    let optimal_keys: IndexMap<Address, IndexSet<StorageKey>> = optimal
        .iter()
        .map(|e| (e.address, e.storage_keys.iter().copied().collect()))
        .collect();
    let key_saving = schedule.key_entry_saving();
    let key_cost = schedule.access_list_storage_key_cost as i64;

    let mut report = AuditReport {
        tx_hash: ctx.tx_hash,
        superfluous_addresses: Vec::new(),
        superfluous_keys: Vec::new(),
        duplicate_keys: Vec::new(),
        missing_addresses: Vec::new(),
        missing_keys: Vec::new(),
        delta_declared: with_declared.vs_empty,
        delta_optimal: with_optimal.vs_empty,
        delta_declared_wei: with_declared.vs_empty_wei,
        delta_optimal_wei: with_optimal.vs_empty_wei,
        regret: with_declared.vs_empty - with_optimal.vs_empty,
    };

    // Keys first: the saving of a touched key counts towards its account
    // whichever entry declares it.
    let mut declared_keys: HashSet<(Address, StorageKey)> = HashSet::new();
    let mut useful_keys: HashMap<Address, i64> = HashMap::new();
    for entry in declared {
        for &key in &entry.storage_keys {
            let finding = KeyFinding {
                address: entry.address,
                key,
                regret: key_cost,
            };
            if !declared_keys.insert((entry.address, key)) {
                report.duplicate_keys.push(finding);
            } else if touched.get(&entry.address).is_some_and(|t| t.keys.contains(&key)) {
                *useful_keys.entry(entry.address).or_default() += 1;
            } else {
                report.superfluous_keys.push(finding);
            }
        }
    }

    let mut seen: HashSet<Address> = HashSet::new();
    for entry in declared {
        let address = entry.address;
        if !seen.insert(address) {
            report.superfluous_addresses.push(AddressFinding {
                address,
                reason: Reason::Duplicate,
                regret: schedule.access_list_address_cost as i64,
            });
            continue;
        }
        if optimal_keys.contains_key(&address) {
            continue;
        }
        let role = auto_warm_role(ctx, fork, &address);
        let account = touched.get(&address);
        let gain = address_gain(schedule, role.is_some(), account.is_some_and(|t| t.has_address_event))
            + key_saving * useful_keys.get(&address).copied().unwrap_or(0);
        if gain == 0 {
            continue;
        }
        let reason = match (role, account) {
            (Some(role), _) => role.into(),
            (None, None) => Reason::NeverAccessed,
            (None, Some(_)) => Reason::Unprofitable,
        };
        report.superfluous_addresses.push(AddressFinding {
            address,
            reason,
            regret: -gain,
        });
    }

    for (address, keys) in &optimal_keys {
        if !seen.contains(address) {
            let role = auto_warm_role(ctx, fork, address);
            let has_event = touched.get(address).is_some_and(|t| t.has_address_event);
            report.missing_addresses.push(MissingAddress {
                address: *address,
                regret: address_gain(schedule, role.is_some(), has_event),
            });
        }
        for key in keys {
            if !declared_keys.contains(&(*address, *key)) {
                report.missing_keys.push(KeyFinding {
                    address: *address,
                    key: *key,
                    regret: key_saving,
                });
            }
        }
    }

    Ok(report)
}

/// Per-transaction flags joined with audit reports during aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxMeta {
    pub tx_hash: TxHash,
    /// The transaction declared a non-empty access list.
    pub has_tal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AggregateError {
    #[error("transaction {0} appears more than once")]
    DuplicateTx(TxHash),
    #[error("report for {0} has no matching transaction metadata")]
    UnknownTx(TxHash),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Gas,
    Wei,
}

/// Which list's deltas a histogram describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Series {
    /// Declared lists, over transactions that carry one.
    Declared,
    /// Optimal lists, over every audited transaction.
    Optimal,
}

/// Counts per symmetric decade bucket: `0`, `±[1, 9]`, `±[10, 99]`, ...
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    buckets: BTreeMap<i32, u64>,
}

impl Histogram {
    fn bucket_of(value: i128) -> i32 {
        if value == 0 {
            return 0;
        }
        let decades = value.unsigned_abs().ilog10() as i32 + 1;
        if value < 0 {
            -decades
        } else {
            decades
        }
    }

    /// Inclusive integer bounds of a bucket index.
    fn bounds(index: i32) -> (i128, i128) {
        if index == 0 {
            return (0, 0);
        }
        let d = index.unsigned_abs() - 1;
        let low = 10i128.pow(d);
        let high = 10i128.checked_pow(d + 1).map_or(i128::MAX, |p| p - 1);
        if index > 0 {
            (low, high)
        } else {
            (-high, -low)
        }
    }

    pub fn add(&mut self, value: i128) {
        *self.buckets.entry(Self::bucket_of(value)).or_default() += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (b, c) in &other.buckets {
            *self.buckets.entry(*b).or_default() += c;
        }
    }

    pub fn total(&self) -> u64 {
        self.buckets.values().sum()
    }

    /// Occupied buckets in ascending order as `(low, high, count)`.
    pub fn rows(&self) -> Vec<(i128, i128, u64)> {
        self.buckets
            .iter()
            .map(|(i, c)| {
                let (lo, hi) = Self::bounds(*i);
                (lo, hi, *c)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histograms {
    pub declared_gas: Histogram,
    pub declared_wei: Histogram,
    pub optimal_gas: Histogram,
    pub optimal_wei: Histogram,
}

impl Histograms {
    pub fn get(&self, series: Series, axis: Axis) -> &Histogram {
        match (series, axis) {
            (Series::Declared, Axis::Gas) => &self.declared_gas,
            (Series::Declared, Axis::Wei) => &self.declared_wei,
            (Series::Optimal, Axis::Gas) => &self.optimal_gas,
            (Series::Optimal, Axis::Wei) => &self.optimal_wei,
        }
    }

    fn merge(&mut self, other: &Histograms) {
        self.declared_gas.merge(&other.declared_gas);
        self.declared_wei.merge(&other.declared_wei);
        self.optimal_gas.merge(&other.optimal_gas);
        self.optimal_wei.merge(&other.optimal_wei);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub n_txs: u64,
    pub n_with_tal: u64,
    pub n_imperfect: u64,
    /// Transactions whose declared list costs more than no list at all.
    pub n_pays_more: u64,
    pub frac_with_tal: f64,
    /// `n_imperfect / n_with_tal`.
    pub frac_imperfect: f64,
    /// `n_pays_more / n_with_tal`.
    pub frac_pays_more: f64,
    /// Number of declared lists with at least one finding of each kind.
    pub counts_by_reason: BTreeMap<DefectKind, u64>,
    pub total_gas_saved_declared: i64,
    pub total_gas_saved_optimal: i64,
    pub total_wei_saved_declared: i128,
    pub total_wei_saved_optimal: i128,
    pub histograms: Histograms,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl AggregateStats {
    /// `(metric, value)` rows in a fixed order.
    pub fn metric_rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("n_txs".to_string(), self.n_txs.to_string()),
            ("n_with_tal".into(), self.n_with_tal.to_string()),
            ("n_imperfect".into(), self.n_imperfect.to_string()),
            ("n_pays_more".into(), self.n_pays_more.to_string()),
            ("frac_with_tal".into(), self.frac_with_tal.to_string()),
            ("frac_imperfect".into(), self.frac_imperfect.to_string()),
            ("frac_pays_more".into(), self.frac_pays_more.to_string()),
            (
                "total_gas_saved_declared".into(),
                self.total_gas_saved_declared.to_string(),
            ),
            (
                "total_gas_saved_optimal".into(),
                self.total_gas_saved_optimal.to_string(),
            ),
            (
                "total_wei_saved_declared".into(),
                self.total_wei_saved_declared.to_string(),
            ),
            (
                "total_wei_saved_optimal".into(),
                self.total_wei_saved_optimal.to_string(),
            ),
        ];
        rows.extend(
            self.counts_by_reason
                .iter()
                .map(|(k, v)| (format!("tals_with_{k}"), v.to_string())),
        );
        rows
    }
}

/// Streaming fold behind [`aggregate`]. Partial aggregators built on disjoint
/// transaction sets combine with [`Aggregator::merge`], which is associative
/// and commutative.
#[derive(Debug, Clone, Default)]
pub struct Aggregator {
    seen: HashSet<TxHash>,
    n_txs: u64,
    n_with_tal: u64,
    n_imperfect: u64,
    n_pays_more: u64,
    counts_by_reason: BTreeMap<DefectKind, u64>,
    gas_declared: i64,
    gas_optimal: i64,
    wei_declared: i128,
    wei_optimal: i128,
    histograms: Histograms,
}

impl Aggregator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one transaction. `report` may be absent for transactions that were
    /// not audited; they count towards `n_txs` only.
    pub fn add(&mut self, meta: &TxMeta, report: Option<&AuditReport>) -> Result<(), AggregateError> {
        if !self.seen.insert(meta.tx_hash) {
            return Err(AggregateError::DuplicateTx(meta.tx_hash));
        }
        if let Some(r) = report {
            if r.tx_hash != meta.tx_hash {
                return Err(AggregateError::UnknownTx(r.tx_hash));
            }
        }
        self.n_txs += 1;
        if meta.has_tal {
            self.n_with_tal += 1;
        }
        let Some(r) = report else { return Ok(()) };
        self.gas_optimal += r.delta_optimal;
        self.wei_optimal += r.delta_optimal_wei;
        self.histograms.optimal_gas.add(r.delta_optimal as i128);
        self.histograms.optimal_wei.add(r.delta_optimal_wei);
        if meta.has_tal {
            self.gas_declared += r.delta_declared;
            self.wei_declared += r.delta_declared_wei;
            self.histograms.declared_gas.add(r.delta_declared as i128);
            self.histograms.declared_wei.add(r.delta_declared_wei);
            if r.is_imperfect() {
                self.n_imperfect += 1;
            }
            if r.delta_declared > 0 {
                self.n_pays_more += 1;
            }
            for kind in r.defect_kinds() {
                *self.counts_by_reason.entry(kind).or_default() += 1;
            }
        }
        Ok(())
    }

    pub fn merge(mut self, other: Aggregator) -> Result<Aggregator, AggregateError> {
        if let Some(dup) = self.seen.intersection(&other.seen).min() {
            return Err(AggregateError::DuplicateTx(*dup));
        }
        self.seen.extend(other.seen);
        self.n_txs += other.n_txs;
        self.n_with_tal += other.n_with_tal;
        self.n_imperfect += other.n_imperfect;
        self.n_pays_more += other.n_pays_more;
        for (k, v) in other.counts_by_reason {
            *self.counts_by_reason.entry(k).or_default() += v;
        }
        self.gas_declared += other.gas_declared;
        self.gas_optimal += other.gas_optimal;
        self.wei_declared += other.wei_declared;
        self.wei_optimal += other.wei_optimal;
        self.histograms.merge(&other.histograms);
        Ok(self)
    }

    pub fn finish(&self) -> AggregateStats {
        AggregateStats {
            n_txs: self.n_txs,
            n_with_tal: self.n_with_tal,
            n_imperfect: self.n_imperfect,
            n_pays_more: self.n_pays_more,
            frac_with_tal: ratio(self.n_with_tal, self.n_txs),
            frac_imperfect: ratio(self.n_imperfect, self.n_with_tal),
            frac_pays_more: ratio(self.n_pays_more, self.n_with_tal),
            counts_by_reason: self.counts_by_reason.clone(),
            total_gas_saved_declared: -self.gas_declared,
            total_gas_saved_optimal: -self.gas_optimal,
            total_wei_saved_declared: -self.wei_declared,
            total_wei_saved_optimal: -self.wei_optimal,
            histograms: self.histograms.clone(),
        }
    }
}

/// Joins reports with per-transaction flags by hash and folds them.
pub fn aggregate<R, M>(reports: R, metas: M) -> Result<AggregateStats, AggregateError>
where
    R: IntoIterator<Item = AuditReport>,
    M: IntoIterator<Item = TxMeta>,
{
    let mut by_hash: HashMap<TxHash, AuditReport> = HashMap::new();
    for r in reports {
        let hash = r.tx_hash;
        if by_hash.insert(hash, r).is_some() {
            return Err(AggregateError::DuplicateTx(hash));
        }
    }
    let mut agg = Aggregator::new();
    for meta in metas {
        agg.add(&meta, by_hash.remove(&meta.tx_hash).as_ref())?;
    }
    if let Some(orphan) = by_hash.keys().min() {
        return Err(AggregateError::UnknownTx(*orphan));
    }
    Ok(agg.finish())
}

/// CSV with header `bucket_low,bucket_high,count`; bounds are inclusive.
pub fn histogram_export(stats: &AggregateStats, series: Series, axis: Axis) -> String {
    let mut out = String::from("bucket_low,bucket_high,count\n");
    for (lo, hi, count) in stats.histograms.get(series, axis).rows() {
        out.push_str(&format!("{lo},{hi},{count}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::access_list::AccessListEntry;
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

    fn trace(events: Vec<AccessEvent>) -> AccessTrace {
        let ctx = TxContext::call(TxHash::from_low_u64(1), a(SENDER), a(RECIPIENT), a(0xc000));
        AccessTrace::new(ctx, events, StateLabel::Ibs).unwrap()
    }

    fn run(t: &AccessTrace, declared: Vec<AccessListEntry>) -> AuditReport {
        audit(
            t,
            &AccessList::new(declared),
            &GasSchedule::berlin(),
            &ForkConfig::default(),
        )
        .unwrap()
    }

    fn regret_sum(r: &AuditReport) -> i64 {
        r.findings().map(|f| f.regret).sum()
    }

    #[test]
    fn bare_recipient_is_flagged() {
        let t = trace(vec![AccessEvent::address(0, a(RECIPIENT))]);
        let r = run(&t, vec![AccessListEntry::new(a(RECIPIENT), vec![])]);
        assert_eq!(
            r.superfluous_addresses,
            vec![AddressFinding {
                address: a(RECIPIENT),
                reason: Reason::AutoWarmRecipient,
                regret: 2400
            }]
        );
        assert_eq!(r.regret, 2400);
        assert_eq!(regret_sum(&r), 2400);
    }

    #[test]
    fn optimal_declaration_is_clean() {
        let t = trace(vec![
            AccessEvent::address(0, a(EXT_A)),
            AccessEvent::read(1, a(EXT_A), k(1)),
        ]);
        let r = run(&t, vec![AccessListEntry::new(a(EXT_A), vec![k(1)])]);
        assert!(r.is_clean());
        assert_eq!(r.regret, 0);
        assert_eq!(r.delta_declared, -200);
    }

    #[test]
    fn omitted_key_costs_100() {
        let t = trace(vec![
            AccessEvent::address(0, a(EXT_A)),
            AccessEvent::read(1, a(EXT_A), k(1)),
            AccessEvent::read(2, a(EXT_A), k(2)),
        ]);
        let r = run(&t, vec![AccessListEntry::new(a(EXT_A), vec![k(1)])]);
        assert_eq!(
            r.missing_keys,
            vec![KeyFinding {
                address: a(EXT_A),
                key: k(2),
                regret: 100
            }]
        );
        assert!(r.missing_addresses.is_empty() && r.superfluous_addresses.is_empty());
        assert_eq!(r.regret, 100);
    }

    #[test]
    fn duplicates_and_never_accessed() {
        let t = trace(vec![
            AccessEvent::address(0, a(EXT_A)),
            AccessEvent::read(1, a(EXT_A), k(1)),
        ]);
        let r = run(
            &t,
            vec![
                AccessListEntry::new(a(EXT_A), vec![k(1)]),
                AccessListEntry::new(a(EXT_A), vec![k(1), k(9)]),
                AccessListEntry::new(a(0xdead), vec![]),
            ],
        );
        let reasons: Vec<_> = r.superfluous_addresses.iter().map(|f| (f.address, f.reason)).collect();
        assert_eq!(
            reasons,
            vec![(a(EXT_A), Reason::Duplicate), (a(0xdead), Reason::NeverAccessed)]
        );
        assert_eq!(r.duplicate_keys.len(), 1);
        assert_eq!(
            r.superfluous_keys,
            vec![KeyFinding {
                address: a(EXT_A),
                key: k(9),
                regret: 1900
            }]
        );
        assert_eq!(r.regret, 2400 + 1900 + 1900 + 2400);
        assert_eq!(regret_sum(&r), r.regret);
    }

    #[test]
    fn duplicate_outranks_auto_warm() {
        let t = trace(vec![]);
        let r = run(
            &t,
            vec![
                AccessListEntry::new(a(SENDER), vec![]),
                AccessListEntry::new(a(SENDER), vec![]),
            ],
        );
        let reasons: Vec<_> = r.superfluous_addresses.iter().map(|f| f.reason).collect();
        assert_eq!(reasons, vec![Reason::AutoWarmSender, Reason::Duplicate]);
    }

    #[test]
    fn auto_warm_above_break_even_is_correct() {
        let t = trace((0..25).map(|i| AccessEvent::read(i, a(RECIPIENT), k(i))).collect());
        let r = run(&t, vec![AccessListEntry::new(a(RECIPIENT), (0..25).map(k).collect())]);
        assert!(r.is_clean());
        assert_eq!(r.delta_declared, -100);

        // Omitting the whole entry: the address row is negative, the keys make it up.
        let r = run(&t, vec![]);
        assert_eq!(
            r.missing_addresses,
            vec![MissingAddress {
                address: a(RECIPIENT),
                regret: -2400
            }]
        );
        assert_eq!(r.missing_keys.len(), 25);
        assert_eq!(r.regret, 100);
        assert_eq!(regret_sum(&r), 100);
    }

    #[test]
    fn break_even_tie_is_not_a_defect() {
        let t = trace((0..24).map(|i| AccessEvent::read(i, a(RECIPIENT), k(i))).collect());
        let r = run(&t, vec![AccessListEntry::new(a(RECIPIENT), (0..24).map(k).collect())]);
        assert!(r.is_clean());
        assert_eq!(r.regret, 0);
        // One key short of the tie is a loss of 100.
        let r = run(&t, vec![AccessListEntry::new(a(RECIPIENT), (0..23).map(k).collect())]);
        assert_eq!(r.superfluous_addresses[0].reason, Reason::AutoWarmRecipient);
        assert_eq!(r.regret, 100);
        assert_eq!(regret_sum(&r), 100);
    }

    #[test]
    fn slot_only_account_is_unprofitable() {
        let t = trace(vec![AccessEvent::read(0, a(EXT_A), k(1))]);
        let r = run(&t, vec![AccessListEntry::new(a(EXT_A), vec![k(1)])]);
        assert_eq!(r.superfluous_addresses[0].reason, Reason::Unprofitable);
        assert_eq!(r.regret, 2300);
        assert_eq!(regret_sum(&r), 2300);
    }

    fn report(hash: u64, delta_declared: i64, regret: i64, reasons: &[Reason]) -> AuditReport {
        AuditReport {
            tx_hash: TxHash::from_low_u64(hash),
            superfluous_addresses: reasons
                .iter()
                .map(|r| AddressFinding {
                    address: a(1),
                    reason: *r,
                    regret: 2400,
                })
                .collect(),
            superfluous_keys: vec![],
            duplicate_keys: vec![],
            missing_addresses: vec![],
            missing_keys: vec![],
            delta_declared,
            delta_optimal: delta_declared - regret,
            delta_declared_wei: delta_declared as i128 * 2,
            delta_optimal_wei: (delta_declared - regret) as i128 * 2,
            regret,
        }
    }

    fn meta(hash: u64, has_tal: bool) -> TxMeta {
        TxMeta {
            tx_hash: TxHash::from_low_u64(hash),
            has_tal,
        }
    }

    #[test]
    fn empty_aggregate() {
        let s = aggregate(vec![], vec![]).unwrap();
        assert_eq!((s.n_txs, s.n_with_tal, s.n_imperfect), (0, 0, 0));
        assert_eq!((s.frac_with_tal, s.frac_imperfect, s.frac_pays_more), (0.0, 0.0, 0.0));
    }

    #[test]
    fn reasons_are_counted_per_tal() {
        let reports = vec![
            report(1, 2400, 2400, &[Reason::AutoWarmRecipient, Reason::AutoWarmRecipient]),
            report(2, 4800, 4800, &[Reason::AutoWarmRecipient, Reason::AutoWarmSender]),
            report(3, 2400, 2400, &[Reason::NeverAccessed]),
        ];
        let metas = (1..=3).map(|h| meta(h, true));
        let s = aggregate(reports, metas).unwrap();
        assert_eq!(s.counts_by_reason[&DefectKind::Address(Reason::AutoWarmRecipient)], 2);
        assert_eq!(s.counts_by_reason[&DefectKind::Address(Reason::AutoWarmSender)], 1);
        assert_eq!(s.n_imperfect, 3);
        assert_eq!(s.frac_pays_more, 1.0);
        assert_eq!(s.total_gas_saved_declared, -9600);
    }

    #[test]
    fn duplicate_and_orphan_transactions() {
        let err = aggregate(vec![report(1, 0, 0, &[]), report(1, 0, 0, &[])], vec![meta(1, true)]).unwrap_err();
        assert_eq!(err, AggregateError::DuplicateTx(TxHash::from_low_u64(1)));
        let err = aggregate(vec![], vec![meta(1, true), meta(1, false)]).unwrap_err();
        assert_eq!(err, AggregateError::DuplicateTx(TxHash::from_low_u64(1)));
        let err = aggregate(vec![report(2, 0, 0, &[])], vec![meta(1, true)]).unwrap_err();
        assert_eq!(err, AggregateError::UnknownTx(TxHash::from_low_u64(2)));
    }

    #[test]
    fn merge_rejects_overlap() {
        let mut x = Aggregator::new();
        x.add(&meta(1, false), None).unwrap();
        let mut y = Aggregator::new();
        y.add(&meta(1, false), None).unwrap();
        assert!(x.merge(y).is_err());
    }

    #[test]
    fn histogram_buckets() {
        let mut h = Histogram::default();
        for v in [0, 0, -200, 2400, 9, 10, -1] {
            h.add(v);
        }
        assert_eq!(
            h.rows(),
            vec![
                (-999, -100, 1),
                (-9, -1, 1),
                (0, 0, 2),
                (1, 9, 1),
                (10, 99, 1),
                (1000, 9999, 1)
            ]
        );
        assert_eq!(h.total(), 7);
        let mut big = Histogram::default();
        big.add(i128::MAX);
        big.add(i128::MIN + 1);
        assert_eq!(big.total(), 2);
        assert_eq!(big.rows()[1].1, i128::MAX);
    }

    #[test]
    fn export_examples() {
        let zeros: Vec<_> = (1..=3).map(|h| report(h, 0, 0, &[])).collect();
        let s = aggregate(zeros, (1..=3).map(|h| meta(h, true))).unwrap();
        assert_eq!(
            histogram_export(&s, Series::Declared, Axis::Gas),
            "bucket_low,bucket_high,count\n0,0,3\n"
        );

        let two = vec![report(1, -200, 0, &[]), report(2, 2400, 2400, &[Reason::NeverAccessed])];
        let s = aggregate(two, vec![meta(1, true), meta(2, true)]).unwrap();
        let csv = histogram_export(&s, Series::Declared, Axis::Gas);
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(csv, histogram_export(&s.clone(), Series::Declared, Axis::Gas));
        assert_eq!(
            histogram_export(&s, Series::Declared, Axis::Wei).lines().nth(1),
            Some("-999,-100,1")
        );
    }
}
