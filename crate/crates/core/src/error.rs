use crate::primitives::TxHash;
use crate::trace::TraceError;

/// Failures of the charging, optimizing and auditing operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("schedule `{name}` does not support access lists")]
    UnsupportedSchedule { name: String },
    #[error("traces belong to different transactions ({generated} vs {executed})")]
    TxMismatch { generated: TxHash, executed: TxHash },
    #[error("malformed trace: {0}")]
    Trace(#[from] TraceError),
}
