//! Fetching blocks and traces through a [`Transport`].

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::{json, Value};
use tal_core::{AccessTrace, DeclaredTal, StateLabel, TxContext, TxHash};

use crate::block::{Block, BlockHeader, BlockTx, Receipt};
use crate::normalize::{normalize_prestate, normalize_struct_logs};
use crate::opcodes::OpcodeMap;
use crate::rpc::{HttpTransport, NodeEndpoint, Transport};
use crate::{IngestError, RawTraceDocument};

/// Which state a transaction is re-executed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceMode {
    /// At its real position in the block.
    Ibs,
    /// As a call on the parent block's post-state.
    Sob,
}

impl TraceMode {
    pub fn label(self) -> StateLabel {
        match self {
            TraceMode::Ibs => StateLabel::Ibs,
            TraceMode::Sob => StateLabel::Sob,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracerKind {
    Prestate,
    StructLogs,
}

impl TracerKind {
    pub fn name(self) -> &'static str {
        match self {
            TracerKind::Prestate => "prestateTracer",
            TracerKind::StructLogs => "structLogs",
        }
    }

    fn config(self) -> Value {
        match self {
            TracerKind::Prestate => json!({"tracer": "prestateTracer"}),
            TracerKind::StructLogs => json!({"disableStorage": true, "enableMemory": false, "enableReturnData": false}),
        }
    }
}

/// Every transaction of one block with its declared list and one trace per
/// requested mode, in `(tx_index, mode)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTraces {
    pub header: BlockHeader,
    pub declared: Vec<DeclaredTal>,
    pub traces: Vec<AccessTrace>,
}

pub struct Client<T> {
    transport: T,
    max_concurrent_requests: usize,
    tracers: Vec<TracerKind>,
    opcodes: OpcodeMap,
}

impl Client<HttpTransport> {
    pub fn connect(endpoint: &NodeEndpoint) -> Self {
        Self::new(HttpTransport::new(endpoint), endpoint.max_concurrent_requests)
    }
}

fn quantity(n: u64) -> String {
    format!("0x{n:x}")
}

impl<T: Transport> Client<T> {
    pub fn new(transport: T, max_concurrent_requests: usize) -> Self {
        Self {
            transport,
            max_concurrent_requests: max_concurrent_requests.max(1),
            tracers: vec![TracerKind::Prestate, TracerKind::StructLogs],
            opcodes: OpcodeMap::default(),
        }
    }

    /// Tracers to try, in order. The first the node accepts is used.
    pub fn with_tracers(mut self, tracers: Vec<TracerKind>) -> Self {
        self.tracers = tracers;
        self
    }

    pub fn with_opcode_map(mut self, opcodes: OpcodeMap) -> Self {
        self.opcodes = opcodes;
        self
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn call_non_null(&self, method: &str, params: Value, what: impl FnOnce() -> String) -> Result<Value, IngestError> {
        match self.transport.call(method, params)? {
            Value::Null => Err(IngestError::NotFound(what())),
            v => Ok(v),
        }
    }

    pub fn fetch_block(&self, number: u64) -> Result<Block, IngestError> {
        let v = self.call_non_null("eth_getBlockByNumber", json!([quantity(number), true]), || {
            format!("block {number}")
        })?;
        Block::from_json(&v)
    }

    pub fn fetch_header(&self, number: u64) -> Result<BlockHeader, IngestError> {
        let v = self.call_non_null("eth_getBlockByNumber", json!([quantity(number), false]), || {
            format!("block {number}")
        })?;
        BlockHeader::from_json(&v)
    }

    pub fn fetch_transaction(&self, hash: TxHash) -> Result<BlockTx, IngestError> {
        let v = self.call_non_null("eth_getTransactionByHash", json!([hash]), || {
            format!("transaction {hash}")
        })?;
        if v.get("blockNumber").is_none_or(Value::is_null) {
            return Err(IngestError::NotFound(format!("transaction {hash} is pending")));
        }
        BlockTx::from_json(&v)
    }

    pub fn fetch_receipt(&self, hash: TxHash) -> Result<Receipt, IngestError> {
        let v = self.call_non_null("eth_getTransactionReceipt", json!([hash]), || {
            format!("receipt of {hash}")
        })?;
        Receipt::from_json(&v)
    }

    /// Runs the tracers in preference order and returns the first document
    /// the node produces.
    pub fn fetch_raw_trace(
        &self,
        header: &BlockHeader,
        tx: &BlockTx,
        mode: TraceMode,
    ) -> Result<(TracerKind, RawTraceDocument), IngestError> {
        let mut refusals = Vec::new();
        for &tracer in &self.tracers {
            let result = match mode {
                TraceMode::Ibs => self
                    .transport
                    .call("debug_traceTransaction", json!([tx.hash, tracer.config()])),
                TraceMode::Sob => {
                    let parent = header
                        .number
                        .checked_sub(1)
                        .ok_or_else(|| IngestError::NotFound("parent of the genesis block".into()))?;
                    let mut call = json!({
                        "from": tx.sender,
                        "gas": quantity(tx.gas),
                        "value": tx.value,
                        "input": tx.input,
                    });
                    if let Some(to) = tx.recipient {
                        call["to"] = json!(to);
                    }
                    self.transport
                        .call("debug_traceCall", json!([call, quantity(parent), tracer.config()]))
                }
            };
            match result {
                Ok(payload) => {
                    return Ok((
                        tracer,
                        RawTraceDocument {
                            tx_hash: tx.hash,
                            tracer_name: tracer.name().into(),
                            payload,
                        },
                    ))
                }
                Err(IngestError::RpcResponse { code, message }) => {
                    log::debug!("{}: {} refused: {code} {message}", tx.hash, tracer.name());
                    refusals.push(format!("{}: {message}", tracer.name()));
                }
                Err(e) => return Err(e),
            }
        }
        Err(IngestError::TracerUnsupported {
            tx_hash: tx.hash,
            message: refusals.join("; "),
        })
    }

    /// Traces `tx` given its block header and receipt.
    pub fn trace_in_block(
        &self,
        header: &BlockHeader,
        tx: &BlockTx,
        receipt: &Receipt,
        mode: TraceMode,
    ) -> Result<AccessTrace, IngestError> {
        let ctx = TxContext {
            tx_hash: tx.hash,
            sender: tx.sender,
            recipient: tx.recipient,
            block_producer: header.miner,
            block_number: header.number,
            tx_index: tx.tx_index,
            block_timestamp: Some(header.timestamp),
            created_contracts: if tx.recipient.is_none() {
                receipt.contract_address.into_iter().collect()
            } else {
                vec![]
            },
            effective_gas_price: receipt.effective_gas_price,
        };
        let (tracer, doc) = self.fetch_raw_trace(header, tx, mode)?;
        match tracer {
            TracerKind::Prestate => normalize_prestate(ctx, mode.label(), &doc),
            TracerKind::StructLogs => normalize_struct_logs(ctx, mode.label(), &doc, &self.opcodes),
        }
    }

    pub fn fetch_trace(&self, hash: TxHash, mode: TraceMode) -> Result<AccessTrace, IngestError> {
        let tx = self.fetch_transaction(hash)?;
        let header = self.fetch_header(tx.block_number)?;
        let receipt = self.fetch_receipt(hash)?;
        self.trace_in_block(&header, &tx, &receipt, mode)
    }

    /// Traces many transactions with at most `max_concurrent_requests` calls
    /// in flight. Results keep the input order.
    pub fn fetch_traces(&self, hashes: &[TxHash], mode: TraceMode) -> Vec<Result<AccessTrace, IngestError>> {
        self.parallel_map(hashes, |h| self.fetch_trace(*h, mode))
    }

    /// Declared list and one trace per mode for each transaction, in input
    /// order.
    #[allow(clippy::type_complexity)]
    pub fn fetch_transactions(
        &self,
        hashes: &[TxHash],
        modes: &[TraceMode],
    ) -> Vec<Result<(DeclaredTal, Vec<AccessTrace>), IngestError>> {
        self.parallel_map(hashes, |h| {
            let tx = self.fetch_transaction(*h)?;
            let header = self.fetch_header(tx.block_number)?;
            let receipt = self.fetch_receipt(*h)?;
            let traces = modes
                .iter()
                .map(|m| self.trace_in_block(&header, &tx, &receipt, *m))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((
                DeclaredTal {
                    tx_hash: tx.hash,
                    access_list: tx.access_list,
                },
                traces,
            ))
        })
    }

    pub fn fetch_block_traces(&self, number: u64, modes: &[TraceMode]) -> Result<BlockTraces, IngestError> {
        let block = self.fetch_block(number)?;
        let per_tx = self.parallel_map(&block.transactions, |tx| {
            let receipt = self.fetch_receipt(tx.hash)?;
            modes
                .iter()
                .map(|m| self.trace_in_block(&block.header, tx, &receipt, *m))
                .collect::<Result<Vec<_>, _>>()
        });
        let mut traces = Vec::with_capacity(block.transactions.len() * modes.len());
        for r in per_tx {
            traces.extend(r?);
        }
        let declared = block
            .transactions
            .iter()
            .map(|tx| DeclaredTal {
                tx_hash: tx.hash,
                access_list: tx.access_list.clone(),
            })
            .collect();
        Ok(BlockTraces {
            header: block.header,
            declared,
            traces,
        })
    }

    fn parallel_map<I: Sync, O: Send>(&self, items: &[I], f: impl Fn(&I) -> O + Sync) -> Vec<O> {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<O>>> = items.iter().map(|_| Mutex::new(None)).collect();
        let workers = self.max_concurrent_requests.min(items.len());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(item) = items.get(i) else { break };
                    let out = f(item);
                    *slots[i].lock().expect("result slot poisoned") = Some(out);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| {
                m.into_inner()
                    .expect("result slot poisoned")
                    .expect("every item processed")
            })
            .collect()
    }
}
