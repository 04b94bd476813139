//! Event log, replay and chain-record ingestion.
//!
//! # Log file format
//!
//! Newline-delimited JSON. The first line is the genesis header naming the
//! owner, the deployment parameters and the probability oracle; every further
//! line is one [`EventRecord`] with keys in a fixed order, ordinals starting
//! at 0 without gaps. Amounts are decimal strings in wei or token base units,
//! loadings and quantiles are Myriad integers.
//!
//! ```text
//! {"genesis":{"owner":"0x…","params":{"eta1":1000,"eta2":500,"q_scr":25758,"q_mcr":10364},"oracle":{"kind":"keccak256"}}}
//! {"ordinal":0,"kind":"Fund","from":"0x…","x":"100000000000000000","y":"100000000000000000"}
//! ```
//!
//! Replaying a log re-executes every event on a freshly deployed contract and
//! demands that each regenerated event equal the recorded one, so the
//! `Xt` field of `ClaimSettled` doubles as an integrity check.

mod event;
pub mod etherscan;
mod trajectory;

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::OracleConfig;
use crate::protocol::{Address, Params, ProtocolError};

pub use event::{Event, EventKind, EventRecord};
pub use trajectory::{
    balances_csv, flow_deltas, replay, trajectory_csv, Recorder, Replay, ReplayError, ReplayFault,
    TrajectoryRow,
};

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("event ordinal {found} does not extend a log of length {expected}")]
    OrdinalMismatch { expected: u64, found: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("log has no genesis header")]
    MissingHeader,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Deployment facts needed to replay a log from scratch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub owner: Address,
    pub params: Params,
    pub oracle: OracleConfig,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    genesis: LogHeader,
}

/// Append-only sequence of event records behind a genesis header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    header: LogHeader,
    records: Vec<EventRecord>,
}

impl EventLog {
    pub fn new(header: LogHeader) -> EventLog {
        EventLog {
            header,
            records: Vec::new(),
        }
    }

    pub fn header(&self) -> &LogHeader {
        &self.header
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn append(&mut self, record: EventRecord) -> Result<(), LedgerError> {
        let expected = self.records.len() as u64;
        if record.ordinal != expected {
            return Err(LedgerError::OrdinalMismatch {
                expected,
                found: record.ordinal,
            });
        }
        self.records.push(record);
        Ok(())
    }

    /// Appends `event` at the next ordinal and returns that ordinal.
    pub fn push(&mut self, event: Event) -> u64 {
        let ordinal = self.records.len() as u64;
        self.records.push(EventRecord { ordinal, event });
        ordinal
    }

    pub fn header_line(&self) -> String {
        serde_json::to_string(&HeaderLine {
            genesis: self.header.clone(),
        })
        .expect("header serializes")
    }

    pub fn record_line(record: &EventRecord) -> String {
        serde_json::to_string(record).expect("records serialize")
    }

    /// Canonical serialization: identical logs give identical bytes.
    pub fn to_jsonl(&self) -> String {
        let mut out = self.header_line();
        out.push('\n');
        for record in &self.records {
            out.push_str(&Self::record_line(record));
            out.push('\n');
        }
        out
    }

    /// Parses a log, checking that ordinals run 0, 1, 2, … Blank lines are
    /// skipped; line numbers in errors are 1-based.
    pub fn parse(text: &str) -> Result<EventLog, LedgerError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, first) = lines.next().ok_or(LedgerError::MissingHeader)?;
        let header: HeaderLine = serde_json::from_str(first).map_err(|e| LedgerError::Parse {
            line,
            message: format!("bad genesis header: {e}"),
        })?;
        let mut log = EventLog::new(header.genesis);
        for (line, text) in lines {
            let record: EventRecord =
                serde_json::from_str(text).map_err(|e| LedgerError::Parse {
                    line,
                    message: e.to_string(),
                })?;
            log.append(record).map_err(|e| LedgerError::Parse {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(log)
    }

    pub fn save(&self, path: &Path) -> Result<(), LedgerError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<EventLog, LedgerError> {
        EventLog::parse(&std::fs::read_to_string(path)?)
    }
}

/// Durable writer for a new log file. Refuses to open an existing file and
/// syncs after every record.
pub struct LogWriter {
    out: BufWriter<File>,
    next: u64,
}

impl LogWriter {
    pub fn create(path: &Path, header: &LogHeader) -> Result<LogWriter, LedgerError> {
        let file = OpenOptions::new().write(true).create_new(true).open(path)?;
        let mut writer = LogWriter {
            out: BufWriter::new(file),
            next: 0,
        };
        let line = EventLog::new(header.clone()).header_line();
        writer.write_line(&line)?;
        Ok(writer)
    }

    pub fn append(&mut self, record: &EventRecord) -> Result<(), LedgerError> {
        if record.ordinal != self.next {
            return Err(LedgerError::OrdinalMismatch {
                expected: self.next,
                found: record.ordinal,
            });
        }
        self.write_line(&EventLog::record_line(record))?;
        self.next += 1;
        Ok(())
    }

    fn write_line(&mut self, line: &str) -> Result<(), LedgerError> {
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        self.out.get_ref().sync_data()?;
        Ok(())
    }
}
