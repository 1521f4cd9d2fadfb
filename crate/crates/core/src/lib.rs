//! Access-list gas analysis over transaction state-access traces.
//!
//! The crate simulates warm/cold state-access charging for a trace under a
//! given access list ([`gas`]), computes the gas-optimal list
//! ([`optimizer`]), classifies the defects of a declared list ([`audit`]),
//! and reads and writes NDJSON corpora ([`corpus`]).
//!
//! ```
//! use tal_core::{charge_accesses, optimal_tal, AccessEvent, AccessTrace, Address, ForkConfig,
//!     GasSchedule, StateLabel, StorageKey, TxContext, TxHash};
//!
//! let a = Address::from_ordinal;
//! let ctx = TxContext::call(TxHash::from_low_u64(1), a(0x5e), a(0x7e), a(0xc0));
//! let trace = AccessTrace::new(
//!     ctx,
//!     vec![AccessEvent::address(0, a(0xaa)), AccessEvent::read(1, a(0xaa), StorageKey::from_low_u64(0))],
//!     StateLabel::Ibs,
//! )
//! .unwrap();
//! let (schedule, fork) = (GasSchedule::berlin(), ForkConfig::default());
//! let tal = optimal_tal(&trace, &schedule, &fork).unwrap();
//! assert_eq!(charge_accesses(&trace, &tal, &schedule, &fork).unwrap().total, 4500);
//! ```

pub mod access_list;
pub mod audit;
pub mod corpus;
mod error;
pub mod gas;
pub mod optimizer;
pub mod primitives;
pub mod trace;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub use access_list::{decode_tal, decode_tal_value, encode_tal, AccessList, AccessListEntry, SchemaError};
pub use audit::{
    aggregate, audit, histogram_export, AggregateError, AggregateStats, Aggregator, AuditReport, Axis, DefectKind,
    Finding, Reason, Series, TxMeta,
};
pub use corpus::{load_corpus, load_declared, store_corpus, store_declared, CorpusError, DeclaredTal};
pub use error::AnalysisError;
pub use gas::{
    auto_warm_addresses, auto_warm_role, charge_accesses, tal_upfront_cost, AutoWarmRole, ForkConfig, GasBreakdown,
    GasSchedule, ScheduleConfigError, ScheduleName, WarmSets,
};
pub use optimizer::{cross_state_delta, optimal_tal, tal_delta, TalDelta};
pub use primitives::{Address, StorageKey, TxHash, B256};
pub use trace::{
    first_touch_sets, validate_trace, AccessEvent, AccessKind, AccessTrace, RawAccessTrace, StateLabel, TraceError,
    TxContext,
};
