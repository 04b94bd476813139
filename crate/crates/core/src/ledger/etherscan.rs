//! Client for Etherscan-compatible `account/txlist` listings.
//!
//! Parsing is pure and works on stored response bodies; network access goes
//! through [`Transport`] so tests can substitute a fixture.

use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::fixedpoint::Wei;
use crate::protocol::Address;

/// Environment variable holding the Etherscan API key.
pub const API_KEY_ENV: &str = "ETHERSCAN_API_KEY";

pub const DEFAULT_ENDPOINT: &str = "https://api.etherscan.io/api";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("response is not JSON: {0}")]
    Json(String),
    #[error("field `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error("API error: {message} ({detail})")]
    Api { message: String, detail: String },
    #[error("fee overflows for transaction {hash}")]
    FeeOverflow { hash: String },
}

/// One row of a transaction listing. Integer fields arrive as decimal strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TransactionRecord {
    pub block_number: u64,
    pub time_stamp: u64,
    pub hash: String,
    pub block_hash: String,
    pub transaction_index: u64,
    pub from: String,
    pub to: String,
    pub value: Wei,
    pub gas: u64,
    pub gas_price: u128,
    pub gas_used: u64,
    pub input: String,
    pub method_id: String,
    pub function_name: String,
    pub contract_address: String,
}

impl TransactionRecord {
    /// gasPrice · gasUsed.
    pub fn fee(&self) -> Result<Wei, IngestError> {
        self.gas_price
            .checked_mul(u128::from(self.gas_used))
            .map(Wei)
            .ok_or_else(|| IngestError::FeeOverflow {
                hash: self.hash.clone(),
            })
    }

    /// Contract creations have an empty `to` and name the new contract.
    pub fn is_creation(&self) -> bool {
        self.to.is_empty() && !self.contract_address.is_empty()
    }
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, name: &str) -> Result<&'a str, IngestError> {
    match obj.get(name) {
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(IngestError::Schema {
            field: name.into(),
            reason: format!("expected a string, found {other}"),
        }),
        None => Err(IngestError::Schema {
            field: name.into(),
            reason: "missing".into(),
        }),
    }
}

fn optional<'a>(obj: &'a serde_json::Map<String, Value>, name: &str) -> Result<&'a str, IngestError> {
    if obj.contains_key(name) {
        field(obj, name)
    } else {
        Ok("")
    }
}

fn integer<T: std::str::FromStr>(obj: &serde_json::Map<String, Value>, name: &str) -> Result<T, IngestError>
where
    T::Err: std::fmt::Display,
{
    field(obj, name)?.parse().map_err(|e: T::Err| IngestError::Schema {
        field: name.into(),
        reason: format!("not an unsigned integer: {e}"),
    })
}

fn record(value: &Value) -> Result<TransactionRecord, IngestError> {
    let obj = value.as_object().ok_or_else(|| IngestError::Schema {
        field: "result".into(),
        reason: "entries must be objects".into(),
    })?;
    Ok(TransactionRecord {
        block_number: integer(obj, "blockNumber")?,
        time_stamp: integer(obj, "timeStamp")?,
        hash: field(obj, "hash")?.to_owned(),
        block_hash: field(obj, "blockHash")?.to_owned(),
        transaction_index: integer(obj, "transactionIndex")?,
        from: field(obj, "from")?.to_owned(),
        to: field(obj, "to")?.to_owned(),
        value: Wei(integer(obj, "value")?),
        gas: integer(obj, "gas")?,
        gas_price: integer(obj, "gasPrice")?,
        gas_used: integer(obj, "gasUsed")?,
        input: field(obj, "input")?.to_owned(),
        method_id: optional(obj, "methodId")?.to_owned(),
        function_name: optional(obj, "functionName")?.to_owned(),
        contract_address: optional(obj, "contractAddress")?.to_owned(),
    })
}

/// Parses a txlist response body.
pub fn parse_txlist(body: &str) -> Result<Vec<TransactionRecord>, IngestError> {
    let root: Value = serde_json::from_str(body).map_err(|e| IngestError::Json(e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| IngestError::Schema {
        field: "<root>".into(),
        reason: "expected an object".into(),
    })?;
    let status = field(obj, "status")?;
    let message = optional(obj, "message")?;
    match obj.get("result") {
        Some(Value::Array(items)) if status == "1" || items.is_empty() => {
            items.iter().map(record).collect()
        }
        _ if status == "0" && message.starts_with("No transactions found") => Ok(Vec::new()),
        Some(Value::String(detail)) if status == "0" => Err(IngestError::Api {
            message: message.to_owned(),
            detail: detail.clone(),
        }),
        Some(other) => Err(IngestError::Schema {
            field: "result".into(),
            reason: format!("expected an array, found {other}"),
        }),
        None => Err(IngestError::Schema {
            field: "result".into(),
            reason: "missing".into(),
        }),
    }
}

pub trait Transport {
    fn get(&self, url: &str) -> Result<String, IngestError>;
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> HttpTransport {
        HttpTransport {
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> HttpTransport {
        HttpTransport::new(Duration::from_secs(30))
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<String, IngestError> {
        self.agent
            .get(url)
            .call()
            .map_err(|e| IngestError::Transport(e.to_string()))?
            .into_string()
            .map_err(|e| IngestError::Transport(e.to_string()))
    }
}

/// Serves a stored response body regardless of the URL.
pub struct FixtureTransport {
    path: PathBuf,
}

impl FixtureTransport {
    pub fn new(path: impl Into<PathBuf>) -> FixtureTransport {
        FixtureTransport { path: path.into() }
    }
}

impl Transport for FixtureTransport {
    fn get(&self, _url: &str) -> Result<String, IngestError> {
        std::fs::read_to_string(&self.path)
            .map_err(|e| IngestError::Transport(format!("{}: {e}", self.path.display())))
    }
}

pub fn txlist_url(endpoint: &str, contract: &Address, api_key: &str) -> String {
    let sep = if endpoint.contains('?') { '&' } else { '?' };
    format!(
        "{endpoint}{sep}module=account&action=txlist&address={contract}&startblock=0&endblock=99999999&sort=asc&apikey={api_key}"
    )
}

pub fn fetch_transactions(
    transport: &impl Transport,
    endpoint: &str,
    contract: &Address,
    api_key: &str,
) -> Result<Vec<TransactionRecord>, IngestError> {
    parse_txlist(&transport.get(&txlist_url(endpoint, contract, api_key))?)
}

/// Fee of every record, indexed by position.
pub fn fee_series(records: &[TransactionRecord]) -> Result<Vec<(u64, Wei)>, IngestError> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| Ok((i as u64, r.fee()?)))
        .collect()
}
