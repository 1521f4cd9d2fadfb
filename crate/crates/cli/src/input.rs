//! Traces grouped by block, from a corpus directory or a node.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::iter::Peekable;
use std::path::Path;

use tal_core::corpus::NdjsonReader;
use tal_core::{load_declared, AccessList, AccessTrace, CorpusError, DeclaredTal, TxHash};
use tal_ingest::{Client, TraceMode, Transport};

use crate::config::Selection;
use crate::error::CliError;

pub const TRACES_FILE: &str = "traces.ndjson";
pub const DECLARED_FILE: &str = "declared.ndjson";

/// Consecutive traces of one block, with the declared lists known for them.
#[derive(Debug, Clone, Default)]
pub struct BlockGroup {
    pub block_number: u64,
    pub traces: Vec<AccessTrace>,
    pub declared: HashMap<TxHash, Option<AccessList>>,
}

impl BlockGroup {
    pub fn declared_for(&self, tx: &TxHash) -> Result<&Option<AccessList>, CliError> {
        self.declared.get(tx).ok_or(CliError::MissingDeclared(*tx))
    }
}

pub type Groups<'a> = Box<dyn Iterator<Item = Result<BlockGroup, CliError>> + 'a>;

fn load_declared_index(path: &Path) -> Result<HashMap<TxHash, Option<AccessList>>, CliError> {
    let mut index = HashMap::new();
    if !path.exists() {
        return Ok(index);
    }
    for (i, rec) in load_declared(path)?.enumerate() {
        let rec = rec?;
        if index.insert(rec.tx_hash, rec.access_list).is_some() {
            return Err(CorpusError::Schema {
                line: i + 1,
                message: format!("duplicate record for {}", rec.tx_hash),
            }
            .into());
        }
    }
    Ok(index)
}

struct CorpusGroups {
    traces: Peekable<NdjsonReader<AccessTrace, BufReader<File>>>,
    declared: HashMap<TxHash, Option<AccessList>>,
    selection: Selection,
    wanted: HashSet<TxHash>,
}

impl CorpusGroups {
    fn keep(&self, t: &AccessTrace) -> bool {
        match &self.selection {
            Selection::All => true,
            Selection::Blocks(r) => r.contains(t.ctx.block_number),
            Selection::Txs(_) => self.wanted.contains(&t.ctx.tx_hash),
        }
    }
}

impl Iterator for CorpusGroups {
    type Item = Result<BlockGroup, CliError>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut group: Option<BlockGroup> = None;
        loop {
            let block = match self.traces.peek() {
                None => break,
                Some(Err(_)) => return Some(Err(self.traces.next()?.unwrap_err().into())),
                Some(Ok(t)) => t.ctx.block_number,
            };
            if group.as_ref().is_some_and(|g| g.block_number != block) {
                break;
            }
            let trace = self.traces.next()?.expect("peeked Ok");
            if !self.keep(&trace) {
                continue;
            }
            let g = group.get_or_insert_with(|| BlockGroup {
                block_number: block,
                ..Default::default()
            });
            if let Some(d) = self.declared.get(&trace.ctx.tx_hash) {
                g.declared.insert(trace.ctx.tx_hash, d.clone());
            }
            g.traces.push(trace);
        }
        group.map(Ok)
    }
}

/// Streams `dir/traces.ndjson` one block at a time. The corpus is expected
/// in `(block, tx_index)` order, as `fetch` writes it; a block split across
/// non-adjacent lines yields several groups.
pub fn corpus_groups(dir: &Path, selection: &Selection) -> Result<Groups<'static>, CliError> {
    let declared = load_declared_index(&dir.join(DECLARED_FILE))?;
    let traces = tal_core::load_corpus(&dir.join(TRACES_FILE))?.peekable();
    let wanted = match selection {
        Selection::Txs(hashes) => hashes.iter().copied().collect(),
        _ => HashSet::new(),
    };
    Ok(Box::new(CorpusGroups {
        traces,
        declared,
        selection: selection.clone(),
        wanted,
    }))
}

/// Fetches block by block (or the listed transactions, grouped by block).
pub fn rpc_groups<'a, T: Transport>(
    client: &'a Client<T>,
    selection: &Selection,
    modes: &'a [TraceMode],
) -> Result<Groups<'a>, CliError> {
    match selection {
        Selection::Blocks(r) => Ok(Box::new((r.first..=r.last).map(move |n| {
            let bt = client.fetch_block_traces(n, modes)?;
            Ok(BlockGroup {
                block_number: n,
                traces: bt.traces,
                declared: bt.declared.into_iter().map(|d| (d.tx_hash, d.access_list)).collect(),
            })
        }))),
        Selection::Txs(hashes) => {
            let mut fetched: Vec<(DeclaredTal, Vec<AccessTrace>)> = client
                .fetch_transactions(hashes, modes)
                .into_iter()
                .collect::<Result<_, _>>()?;
            fetched.sort_by_key(|(_, traces)| traces.first().map(|t| (t.ctx.block_number, t.ctx.tx_index)));
            let mut groups: Vec<BlockGroup> = Vec::new();
            for (declared, traces) in fetched {
                let Some(block) = traces.first().map(|t| t.ctx.block_number) else {
                    continue;
                };
                if groups.last().is_none_or(|g| g.block_number != block) {
                    groups.push(BlockGroup {
                        block_number: block,
                        ..Default::default()
                    });
                }
                let g = groups.last_mut().expect("just pushed");
                g.declared.insert(declared.tx_hash, declared.access_list);
                g.traces.extend(traces);
            }
            Ok(Box::new(groups.into_iter().map(Ok)))
        }
        Selection::All => Err(CliError::Config(
            "reading from a node needs --blocks or --tx-file".into(),
        )),
    }
}
