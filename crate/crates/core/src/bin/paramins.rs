use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use paramins::cli::{self, CliError, Source};
use paramins::ledger::etherscan::API_KEY_ENV;
use paramins::Address;

/// Reference implementation of a parametric insurance contract with an
/// actuarial solvency engine.
///
/// Exit codes: 0 success, 1 user error, 2 internal invariant violation.
#[derive(Parser)]
#[command(name = "paramins", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario script against a fresh contract.
    ///
    /// Writes events.jsonl, trajectory.csv, balances.csv, state.txt and, if
    /// the contract was liquidated, liquidation.json into OUT.
    RunScenario {
        script: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Do not print the step log.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Generate the random-portfolio SCR/MCR trajectory (θ ~ U(0,1), l ∈ {1, 5} ETH).
    GenExample1 {
        #[arg(long, short)]
        n: usize,
        #[arg(long, short, default_value_t = 1)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Compare the exact and normal-approximation capital of a portfolio.
    ///
    /// The portfolio is a CSV with columns theta,payout[,eta1,eta2]; payout in ETH.
    RiskCompare {
        portfolio: PathBuf,
        #[arg(long, short, default_value_t = 0.995)]
        alpha: f64,
    },
    /// Replay an event log and write its trajectory CSV.
    Replay {
        log: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Also write cumulative ETH flows per address.
        #[arg(long)]
        balances: Option<PathBuf>,
    },
    /// Fetch a contract's transaction list and write it with per-transaction fees.
    ///
    /// The fee series goes to <OUT stem>.fees.csv beside OUT.
    #[command(group(ArgGroup::new("source").required(true).args(["fixture", "endpoint"])))]
    Ingest {
        /// Stored txlist response body.
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Base URL of an Etherscan-compatible API, e.g. https://api-sepolia.etherscan.io/api
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        address: Address,
        #[arg(long, env = API_KEY_ENV, hide_env_values = true, default_value = "")]
        api_key: String,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::RunScenario { script, out, quiet } => {
            let run = cli::run_scenario(&script, &out)?;
            if !quiet {
                print!("{}", run.summary());
            }
        }
        Command::GenExample1 { n, seed, out } => {
            let rows = cli::gen_example1(n, seed, &out)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::RiskCompare { portfolio, alpha } => {
            print!("{}", cli::risk_compare(&portfolio, alpha)?.report());
        }
        Command::Replay { log, out, balances } => {
            let replayed = cli::replay_log(&log, &out, balances.as_deref())?;
            println!(
                "replayed {} events; final B = {} ETH, X = {} ETH",
                replayed.rows.len(),
                replayed.state.balance.to_eth_string(),
                replayed.state.surplus.to_eth_string()
            );
        }
        Command::Ingest {
            fixture,
            endpoint,
            address,
            api_key,
            out,
        } => {
            let source = match (fixture, endpoint) {
                (Some(path), _) => Source::Fixture(path),
                (None, Some(url)) => Source::Endpoint(url),
                (None, None) => unreachable!("clap requires one source"),
            };
            let records = cli::ingest(&source, &address, &api_key, &out)?;
            println!("wrote {} transactions to {}", records.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(parsed) => parsed,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(parsed.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
