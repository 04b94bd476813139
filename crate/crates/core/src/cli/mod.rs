//! Command implementations behind the `paramins` binary. Each command is a
//! plain function so tests can drive it without a process boundary.

pub mod compare;
pub mod example1;
pub mod ingest;
pub mod scenario;
pub mod script;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::ledger::{
    balances_csv, replay, trajectory_csv, EventLog, LedgerError, Replay,
};

pub use compare::{compare, parse_portfolio, Comparison};
pub use example1::{example1, example1_csv, Example1Row};
pub use ingest::{ingest, Source};
pub use scenario::{execute, ScenarioRun, StepOutcome};
pub use script::{parse_script, Script, ScriptError};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: unreadable files, malformed scripts, rejected steps.
    #[error("{0}")]
    User(String),
    /// The implementation broke one of its own guarantees.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }
}

impl From<ScriptError> for CliError {
    fn from(e: ScriptError) -> CliError {
        CliError::User(e.to_string())
    }
}

impl From<LedgerError> for CliError {
    fn from(e: LedgerError) -> CliError {
        match e {
            LedgerError::Protocol(p) if p.is_invariant_violation() => {
                CliError::Invariant(p.to_string())
            }
            other => CliError::User(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

/// Writes through a temporary sibling and renames, so a failed run never
/// leaves a partial file behind.
pub fn write_atomically(path: &Path, contents: &str) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::User(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::User(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let mut file = std::fs::File::create(&tmp).map_err(fail)?;
    file.write_all(contents.as_bytes()).map_err(fail)?;
    file.sync_all().map_err(fail)?;
    std::fs::rename(&tmp, path).map_err(fail)
}

/// Parses and executes a scenario script, writing its outputs to `out_dir`.
pub fn run_scenario(script_path: &Path, out_dir: &Path) -> Result<ScenarioRun, CliError> {
    let script = parse_script(&read(script_path)?)
        .map_err(|e| CliError::User(format!("{}: {e}", script_path.display())))?;
    let run = execute(&script)?;
    run.write(out_dir)?;
    Ok(run)
}

/// Replays an event log and writes its trajectory CSV, and optionally the
/// cumulative ETH flows as a balances CSV starting from empty wallets.
pub fn replay_log(log_path: &Path, out_csv: &Path, balances: Option<&Path>) -> Result<Replay, CliError> {
    let log = EventLog::load(log_path)
        .map_err(|e| CliError::User(format!("{}: {e}", log_path.display())))?;
    let replayed = replay(&log).map_err(|e| {
        if e.is_invariant_violation() {
            CliError::Invariant(e.to_string())
        } else {
            CliError::User(e.to_string())
        }
    })?;
    write_atomically(out_csv, &trajectory_csv(&replayed.rows))?;
    if let Some(path) = balances {
        write_atomically(path, &balances_csv(&replayed.rows, &[]))?;
    }
    Ok(replayed)
}

pub fn gen_example1(n: usize, seed: u64, out_csv: &Path) -> Result<Vec<Example1Row>, CliError> {
    let rows = example1(n, seed)?;
    write_atomically(out_csv, &example1_csv(&rows))?;
    Ok(rows)
}

pub fn risk_compare(portfolio_path: &Path, alpha: f64) -> Result<Comparison, CliError> {
    compare(&parse_portfolio(&read(portfolio_path)?)?, alpha)
}
