//! Blocks, transactions and receipts as returned by `eth_*` methods.

use serde_json::Value;
use tal_core::{decode_tal_value, AccessList, Address, TxHash};

use crate::IngestError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockHeader {
    pub number: u64,
    pub hash: TxHash,
    pub parent_hash: TxHash,
    pub timestamp: u64,
    pub miner: Address,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockTx {
    pub hash: TxHash,
    pub block_number: u64,
    pub tx_index: u64,
    pub tx_type: u64,
    pub sender: Address,
    /// `None` for contract creation.
    pub recipient: Option<Address>,
    pub gas: u64,
    /// Hex quantity, passed through verbatim when re-executing.
    pub value: String,
    pub input: String,
    pub gas_price: Option<u128>,
    pub max_fee_per_gas: Option<u128>,
    pub max_priority_fee_per_gas: Option<u128>,
    /// `None` when the field is absent, which differs from an empty list.
    pub access_list: Option<AccessList>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    /// In block order.
    pub transactions: Vec<BlockTx>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub tx_hash: TxHash,
    pub effective_gas_price: u64,
    pub contract_address: Option<Address>,
    pub status: Option<u64>,
}

fn field<'a>(obj: &'a Value, name: &str) -> Result<&'a Value, IngestError> {
    match obj.get(name) {
        Some(v) if !v.is_null() => Ok(v),
        _ => Err(IngestError::Schema(format!("missing field `{name}`"))),
    }
}

fn str_field<'a>(obj: &'a Value, name: &str) -> Result<&'a str, IngestError> {
    field(obj, name)?
        .as_str()
        .ok_or_else(|| IngestError::Schema(format!("field `{name}` is not a string")))
}

pub(crate) fn parse_quantity(text: &str) -> Result<u128, IngestError> {
    let digits = text
        .strip_prefix("0x")
        .ok_or_else(|| IngestError::Schema(format!("quantity without 0x: `{text}`")))?;
    u128::from_str_radix(digits, 16).map_err(|_| IngestError::Schema(format!("bad quantity `{text}`")))
}

fn u64_field(obj: &Value, name: &str) -> Result<u64, IngestError> {
    let n = parse_quantity(str_field(obj, name)?)?;
    u64::try_from(n).map_err(|_| IngestError::Schema(format!("field `{name}` overflows u64")))
}

fn opt_u128_field(obj: &Value, name: &str) -> Result<Option<u128>, IngestError> {
    match obj.get(name).and_then(Value::as_str) {
        Some(s) => parse_quantity(s).map(Some),
        None => Ok(None),
    }
}

fn parse_hex<T: std::str::FromStr>(obj: &Value, name: &str) -> Result<T, IngestError>
where
    T::Err: std::fmt::Display,
{
    let s = str_field(obj, name)?;
    s.parse()
        .map_err(|e| IngestError::Schema(format!("field `{name}`: {e}")))
}

fn opt_address(obj: &Value, name: &str) -> Result<Option<Address>, IngestError> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(_) => parse_hex(obj, name).map(Some),
    }
}

impl BlockHeader {
    pub fn from_json(v: &Value) -> Result<Self, IngestError> {
        Ok(Self {
            number: u64_field(v, "number")?,
            hash: parse_hex(v, "hash")?,
            parent_hash: parse_hex(v, "parentHash")?,
            timestamp: u64_field(v, "timestamp")?,
            miner: parse_hex(v, "miner")?,
        })
    }
}

impl BlockTx {
    pub fn from_json(v: &Value) -> Result<Self, IngestError> {
        let access_list = match v.get("accessList") {
            None | Some(Value::Null) => None,
            Some(list) => Some(decode_tal_value(list).map_err(|e| IngestError::Schema(format!("accessList: {e}")))?),
        };
        Ok(Self {
            hash: parse_hex(v, "hash")?,
            block_number: u64_field(v, "blockNumber")?,
            tx_index: u64_field(v, "transactionIndex")?,
            tx_type: match v.get("type") {
                Some(Value::String(_)) => u64_field(v, "type")?,
                _ => 0,
            },
            sender: parse_hex(v, "from")?,
            recipient: opt_address(v, "to")?,
            gas: u64_field(v, "gas")?,
            value: str_field(v, "value")?.to_string(),
            input: str_field(v, "input")?.to_string(),
            gas_price: opt_u128_field(v, "gasPrice")?,
            max_fee_per_gas: opt_u128_field(v, "maxFeePerGas")?,
            max_priority_fee_per_gas: opt_u128_field(v, "maxPriorityFeePerGas")?,
            access_list,
        })
    }
}

impl Block {
    /// Parses an `eth_getBlockByNumber(.., true)` result.
    pub fn from_json(v: &Value) -> Result<Self, IngestError> {
        let header = BlockHeader::from_json(v)?;
        let txs = field(v, "transactions")?
            .as_array()
            .ok_or_else(|| IngestError::Schema("`transactions` is not an array".into()))?;
        let mut transactions = txs.iter().map(BlockTx::from_json).collect::<Result<Vec<_>, _>>()?;
        transactions.sort_by_key(|t| t.tx_index);
        Ok(Self { header, transactions })
    }
}

impl Receipt {
    pub fn from_json(v: &Value) -> Result<Self, IngestError> {
        Ok(Self {
            tx_hash: parse_hex(v, "transactionHash")?,
            effective_gas_price: u64_field(v, "effectiveGasPrice")?,
            contract_address: opt_address(v, "contractAddress")?,
            status: match v.get("status") {
                Some(Value::String(_)) => Some(u64_field(v, "status")?),
                _ => None,
            },
        })
    }
}
