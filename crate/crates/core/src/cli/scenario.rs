use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::script::{Action, BurnAmount, Script};
use super::{write_atomically, CliError};
use crate::ledger::{balances_csv, trajectory_csv, LogHeader, Recorder};
use crate::protocol::{Address, LiquidationReport, ProtocolError};

/// What happened at one scripted step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub line: usize,
    pub text: String,
    /// Event ordinal, or `None` when the step was rejected as expected.
    pub ordinal: Option<u64>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub script: Script,
    pub recorder: Recorder,
    pub outcomes: Vec<StepOutcome>,
}

#[derive(Serialize)]
struct LiquidationEntry<'a> {
    ordinal: u64,
    #[serde(flatten)]
    report: &'a LiquidationReport,
}

fn rejection(line: usize, text: &str, err: ProtocolError) -> CliError {
    let message = format!("line {line}: `{text}` rejected: {err}");
    if err.is_invariant_violation() {
        CliError::Invariant(message)
    } else {
        CliError::User(message)
    }
}

/// Executes every step of `script` on a freshly deployed contract.
pub fn execute(script: &Script) -> Result<ScenarioRun, CliError> {
    let deployer = script.actor(&script.deployer).address;
    let mut recorder = Recorder::deploy(LogHeader {
        owner: deployer,
        params: script.params,
        oracle: script.oracle.clone(),
    });
    let addr = |name: &str| -> Address { script.actor(name).address };
    let mut outcomes = Vec::with_capacity(script.steps.len());

    for step in &script.steps {
        let result: Result<String, ProtocolError> = match &step.action {
            Action::Fund { actor, amount } => recorder
                .fund(addr(actor), *amount)
                .map(|y| format!("minted {} tokens", y.to_tokens_string())),
            Action::Underwrite {
                actor,
                description,
                payout,
            } => recorder
                .underwrite(addr(actor), description.clone(), *payout)
                .map(|id| {
                    let p = recorder.state().policy(id).expect("just underwritten");
                    format!(
                        "policy #{id}, theta {}, premium {} ETH",
                        p.risk.theta.to_decimal_string(),
                        p.premium.to_eth_string()
                    )
                }),
            Action::Burn { actor, amount } => {
                let from = addr(actor);
                let y = match amount {
                    BurnAmount::Tokens(y) => *y,
                    BurnAmount::Max => recorder.state().max_burnable(&from),
                };
                recorder.burn(from, y).map(|x| {
                    format!(
                        "burned {} tokens for {} ETH",
                        y.to_tokens_string(),
                        x.to_eth_string()
                    )
                })
            }
            Action::Settle {
                policy,
                observed,
                by,
            } => {
                let caller = by.as_deref().map_or(deployer, addr);
                recorder.settle(caller, *policy, observed).map(|s| {
                    match (s.compensated, &s.liquidation) {
                        (false, _) => "no compensation".to_owned(),
                        (true, None) => "compensation paid".to_owned(),
                        (true, Some(r)) => format!(
                            "compensation paid; liquidation with X̃ = {} wei",
                            r.trial_surplus
                        ),
                    }
                })
            }
            Action::UpdateParams { update, by } => {
                let caller = by.as_deref().map_or(deployer, addr);
                let params = update.apply(&recorder.state().params);
                recorder.update_params(caller, params).map(|()| {
                    format!(
                        "eta1 {} eta2 {} q_scr {} q_mcr {}",
                        params.eta1.to_decimal_string(),
                        params.eta2.to_decimal_string(),
                        params.q_scr.to_decimal_string(),
                        params.q_mcr.to_decimal_string()
                    )
                })
            }
        };
        let outcome = match (result, step.expect_reject) {
            (Ok(detail), false) => StepOutcome {
                line: step.line,
                text: step.text.clone(),
                ordinal: Some(recorder.log().len() as u64 - 1),
                detail,
            },
            (Ok(_), true) => {
                return Err(CliError::User(format!(
                    "line {}: `{}` was expected to be rejected but succeeded",
                    step.line, step.text
                )))
            }
            (Err(e), true) if !e.is_invariant_violation() => StepOutcome {
                line: step.line,
                text: step.text.clone(),
                ordinal: None,
                detail: format!("rejected as expected: {e}"),
            },
            (Err(e), _) => return Err(rejection(step.line, &step.text, e)),
        };
        recorder
            .state()
            .check_invariants()
            .map_err(|e| CliError::Invariant(format!("after line {}: {e}", step.line)))?;
        outcomes.push(outcome);
    }
    Ok(ScenarioRun {
        script: script.clone(),
        recorder,
        outcomes,
    })
}

impl ScenarioRun {
    /// Per-actor wallet balances, labelled with cast names.
    pub fn balances_csv(&self) -> String {
        let wallets: Vec<(String, Address, crate::fixedpoint::Wei)> = self
            .script
            .cast
            .values()
            .map(|a| (a.name.clone(), a.address, a.initial))
            .collect();
        balances_csv(self.recorder.rows(), &wallets)
    }

    pub fn liquidation_json(&self) -> Option<String> {
        let entries: Vec<LiquidationEntry> = self
            .recorder
            .liquidations()
            .iter()
            .map(|(ordinal, report)| LiquidationEntry {
                ordinal: *ordinal,
                report,
            })
            .collect();
        if entries.is_empty() {
            None
        } else {
            Some(serde_json::to_string_pretty(&entries).expect("reports serialize") + "\n")
        }
    }

    /// Human-readable step log.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            let tag = o.ordinal.map_or("-".to_owned(), |n| n.to_string());
            let _ = writeln!(out, "[{tag:>3}] line {:>3}: {}  => {}", o.line, o.text, o.detail);
        }
        let s = self.recorder.state();
        let _ = writeln!(
            out,
            "final: B = {} ETH, X = {} ETH, tokens = {}, SCR = {} wei, MCR = {} wei",
            s.balance.to_eth_string(),
            s.surplus.to_eth_string(),
            s.total_supply.to_tokens_string(),
            s.scr(),
            s.mcr()
        );
        for (ordinal, report) in self.recorder.liquidations() {
            let _ = writeln!(out, "liquidation at event {ordinal}:");
            for r in &report.refunds {
                let _ = writeln!(
                    out,
                    "  refund policy #{} to {}: {} ETH (owed {})",
                    r.policy_id,
                    self.label(&r.holder),
                    r.paid.to_eth_string(),
                    r.owed.to_eth_string()
                );
            }
            for d in &report.distributions {
                let _ = writeln!(
                    out,
                    "  distribute to {}: {} ETH for {} tokens",
                    self.label(&d.holder),
                    d.paid.to_eth_string(),
                    d.tokens.to_tokens_string()
                );
            }
            let _ = writeln!(out, "  dust {} ETH", report.dust.to_eth_string());
        }
        out
    }

    fn label(&self, address: &Address) -> String {
        self.script
            .cast
            .values()
            .find(|a| a.address == *address)
            .map_or_else(|| address.to_string(), |a| a.name.clone())
    }

    /// Writes `events.jsonl`, `trajectory.csv`, `balances.csv`, `state.txt`
    /// and, after a liquidation, `liquidation.json` into `out_dir`.
    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::User(format!("{}: {e}", out_dir.display())))?;
        write_atomically(&out_dir.join("events.jsonl"), &self.recorder.log().to_jsonl())?;
        write_atomically(&out_dir.join("trajectory.csv"), &trajectory_csv(self.recorder.rows()))?;
        write_atomically(&out_dir.join("balances.csv"), &self.balances_csv())?;
        write_atomically(&out_dir.join("state.txt"), &self.recorder.state().canonical_text())?;
        if let Some(json) = self.liquidation_json() {
            write_atomically(&out_dir.join("liquidation.json"), &json)?;
        }
        Ok(())
    }
}
