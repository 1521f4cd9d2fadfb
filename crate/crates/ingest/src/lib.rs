//! Ingestion of blocks and state-access traces from an Ethereum node.
//!
//! [`Client`] issues read-only JSON-RPC calls through a [`Transport`] and
//! normalizes tracer output into [`tal_core::AccessTrace`] records. Two
//! tracers are understood: `prestateTracer` (preferred by default) and the
//! default struct-log tracer, whose opcodes are mapped to access events by a
//! data-driven [`OpcodeMap`].

mod block;
mod client;
mod normalize;
mod opcodes;
mod rpc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tal_core::TxHash;

pub use block::{Block, BlockHeader, BlockTx, Receipt};
pub use client::{BlockTraces, Client, TraceMode, TracerKind};
pub use normalize::{normalize_prestate, normalize_struct_logs};
pub use opcodes::{FrameContext, OpcodeMap, OpcodeRule, RuleKind};
pub use rpc::{HttpTransport, NodeEndpoint, RecordedTransport, Recording, Transport};

/// Tracer output exactly as the node returned it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTraceDocument {
    pub tx_hash: TxHash,
    pub tracer_name: String,
    pub payload: Value,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
    #[error("RPC transport error: {0}")]
    Rpc(String),
    #[error("RPC error {code}: {message}")]
    RpcResponse { code: i64, message: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("unexpected RPC payload: {0}")]
    Schema(String),
    #[error("no supported tracer for {tx_hash}: {message}")]
    TracerUnsupported { tx_hash: TxHash, message: String },
    #[error("cannot normalize {} output for {}: {message}", raw.tracer_name, raw.tx_hash)]
    Normalization {
        message: String,
        raw: Box<RawTraceDocument>,
    },
}
