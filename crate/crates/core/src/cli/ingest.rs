use std::path::{Path, PathBuf};

use super::{write_atomically, CliError};
use crate::ledger::etherscan::{
    fee_series, fetch_transactions, FixtureTransport, HttpTransport, IngestError, TransactionRecord,
};
use crate::protocol::Address;

/// Where transaction listings come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    /// A stored response body.
    Fixture(PathBuf),
    /// Base URL of an Etherscan-compatible API.
    Endpoint(String),
}

fn user(e: IngestError) -> CliError {
    CliError::User(e.to_string())
}

pub const TRANSACTION_COLUMNS: [&str; 16] = [
    "blockNumber",
    "timeStamp",
    "hash",
    "blockHash",
    "transactionIndex",
    "from",
    "to",
    "value",
    "gas",
    "gasPrice",
    "gasUsed",
    "input",
    "methodId",
    "functionName",
    "contractAddress",
    "fee",
];

pub fn transactions_csv(records: &[TransactionRecord]) -> Result<String, CliError> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(TRANSACTION_COLUMNS).expect("in-memory write");
    for r in records {
        out.write_record([
            r.block_number.to_string(),
            r.time_stamp.to_string(),
            r.hash.clone(),
            r.block_hash.clone(),
            r.transaction_index.to_string(),
            r.from.clone(),
            r.to.clone(),
            r.value.to_string(),
            r.gas.to_string(),
            r.gas_price.to_string(),
            r.gas_used.to_string(),
            r.input.clone(),
            r.method_id.clone(),
            r.function_name.clone(),
            r.contract_address.clone(),
            r.fee().map_err(user)?.to_string(),
        ])
        .expect("in-memory write");
    }
    Ok(String::from_utf8(out.into_inner().expect("in-memory flush")).expect("csv is utf-8"))
}

/// Columns `ordinal,hash,functionName,fee`, fee in wei.
pub fn fees_csv(records: &[TransactionRecord]) -> Result<String, CliError> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["ordinal", "hash", "functionName", "fee"])
        .expect("in-memory write");
    for ((ordinal, fee), r) in fee_series(records).map_err(user)?.into_iter().zip(records) {
        let name = if r.is_creation() {
            "(contract creation)".to_owned()
        } else {
            r.function_name.clone()
        };
        out.write_record([ordinal.to_string(), r.hash.clone(), name, fee.to_string()])
            .expect("in-memory write");
    }
    Ok(String::from_utf8(out.into_inner().expect("in-memory flush")).expect("csv is utf-8"))
}

/// `transactions.csv` → `transactions.fees.csv`, next to it.
pub fn fees_path(out_csv: &Path) -> PathBuf {
    let stem = out_csv
        .file_stem()
        .map_or_else(|| "transactions".into(), |s| s.to_string_lossy().into_owned());
    out_csv.with_file_name(format!("{stem}.fees.csv"))
}

/// Fetches the listing for `contract`, then writes the transaction CSV to
/// `out_csv` and the fee series beside it. Nothing is written unless the
/// listing was fetched and parsed in full.
pub fn ingest(
    source: &Source,
    contract: &Address,
    api_key: &str,
    out_csv: &Path,
) -> Result<Vec<TransactionRecord>, CliError> {
    let records = match source {
        Source::Fixture(path) => {
            fetch_transactions(&FixtureTransport::new(path), "fixture", contract, api_key)
        }
        Source::Endpoint(url) => {
            fetch_transactions(&HttpTransport::default(), url, contract, api_key)
        }
    }
    .map_err(user)?;
    let transactions = transactions_csv(&records)?;
    let fees = fees_csv(&records)?;
    write_atomically(out_csv, &transactions)?;
    write_atomically(&fees_path(out_csv), &fees)?;
    Ok(records)
}
