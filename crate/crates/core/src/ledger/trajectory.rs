use indexmap::IndexMap;
use thiserror::Error;

use super::{Event, EventLog, LogHeader};
use crate::fixedpoint::{SignedAmount, TokenAmount, Wei};
use crate::oracle::{EventDescription, OracleConfig};
use crate::protocol::{
    Address, ContractState, LiquidationReport, Params, PolicyId, ProtocolError, Settlement,
};

/// Contract figures after one event, plus every participant's token holding
/// and cumulative net ETH received from the contract (negative when paid in).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryRow {
    pub ordinal: u64,
    pub balance: Wei,
    pub surplus: Wei,
    pub scr: SignedAmount,
    pub mcr: SignedAmount,
    pub total_supply: TokenAmount,
    pub tokens: IndexMap<Address, TokenAmount>,
    pub flows: IndexMap<Address, SignedAmount>,
}

/// A contract together with its event log and trajectory. Every accepted
/// operation appends exactly one event and one row; rejected operations
/// change nothing.
#[derive(Debug, Clone)]
pub struct Recorder {
    state: ContractState,
    oracle: OracleConfig,
    log: EventLog,
    rows: Vec<TrajectoryRow>,
    flows: IndexMap<Address, SignedAmount>,
    liquidations: Vec<(u64, LiquidationReport)>,
}

impl Recorder {
    pub fn deploy(header: LogHeader) -> Recorder {
        Recorder {
            state: ContractState::deploy(header.owner, header.params),
            oracle: header.oracle.clone(),
            log: EventLog::new(header),
            rows: Vec::new(),
            flows: IndexMap::new(),
            liquidations: Vec::new(),
        }
    }

    pub fn state(&self) -> &ContractState {
        &self.state
    }

    pub fn oracle(&self) -> &OracleConfig {
        &self.oracle
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn rows(&self) -> &[TrajectoryRow] {
        &self.rows
    }

    pub fn liquidations(&self) -> &[(u64, LiquidationReport)] {
        &self.liquidations
    }

    pub fn fund(&mut self, from: Address, x: Wei) -> Result<TokenAmount, ProtocolError> {
        let (minted, event) = self.state.fund(from, x)?;
        self.commit(event, None);
        Ok(minted)
    }

    pub fn underwrite(
        &mut self,
        customer: Address,
        description: EventDescription,
        payout: Wei,
    ) -> Result<PolicyId, ProtocolError> {
        let (id, event) = self
            .state
            .underwrite(customer, description, payout, &self.oracle)?;
        self.commit(event, None);
        Ok(id)
    }

    pub fn burn(&mut self, from: Address, y: TokenAmount) -> Result<Wei, ProtocolError> {
        let (paid, event) = self.state.burn(from, y)?;
        self.commit(event, None);
        Ok(paid)
    }

    pub fn settle(
        &mut self,
        caller: Address,
        id: PolicyId,
        observed: &EventDescription,
    ) -> Result<Settlement, ProtocolError> {
        let (settlement, event) = self.state.settle(caller, id, observed, &self.oracle)?;
        self.commit(event, Some(&settlement));
        Ok(settlement)
    }

    pub fn settle_with_outcome(
        &mut self,
        caller: Address,
        id: PolicyId,
        compensated: bool,
    ) -> Result<Settlement, ProtocolError> {
        let (settlement, event) = self.state.settle_with_outcome(caller, id, compensated)?;
        self.commit(event, Some(&settlement));
        Ok(settlement)
    }

    pub fn update_params(&mut self, caller: Address, params: Params) -> Result<(), ProtocolError> {
        let event = self.state.update_params(caller, params)?;
        self.commit(event, None);
        Ok(())
    }

    fn commit(&mut self, event: Event, settlement: Option<&Settlement>) {
        for (who, delta) in flow_deltas(&self.state, &event, settlement) {
            let slot = self.flows.entry(who).or_insert(SignedAmount(0));
            *slot = SignedAmount(slot.0 + delta.0);
        }
        for holder in self.state.tokens.keys() {
            self.flows.entry(*holder).or_insert(SignedAmount(0));
        }
        let ordinal = self.log.push(event);
        if let Some(report) = settlement.and_then(|s| s.liquidation.clone()) {
            self.liquidations.push((ordinal, report));
        }
        self.rows.push(TrajectoryRow {
            ordinal,
            balance: self.state.balance,
            surplus: self.state.surplus,
            scr: self.state.scr(),
            mcr: self.state.mcr(),
            total_supply: self.state.total_supply,
            tokens: self.state.tokens.clone(),
            flows: self.flows.clone(),
        });
    }
}

/// Net ETH each address receives from the contract because of `event`,
/// evaluated against the state the event left behind.
pub fn flow_deltas(
    state: &ContractState,
    event: &Event,
    settlement: Option<&Settlement>,
) -> Vec<(Address, SignedAmount)> {
    let signed = |w: Wei| SignedAmount(w.0 as i128);
    let mut out = Vec::new();
    match event {
        Event::Fund { from, x, .. } => out.push((*from, SignedAmount(-signed(*x).0))),
        Event::Burn { from, x, .. } => out.push((*from, signed(*x))),
        Event::InsuranceUnderwritten {
            contract_id,
            customer,
            ..
        } => {
            let premium = state.policy(*contract_id).map(|p| p.premium).unwrap_or_default();
            out.push((*customer, SignedAmount(-signed(premium).0)));
        }
        Event::ClaimSettled {
            contract_id,
            customer,
            payout_transferred,
            ..
        } => {
            if *payout_transferred {
                let payout = state
                    .policy(*contract_id)
                    .map(|p| p.risk.payout)
                    .unwrap_or_default();
                out.push((*customer, signed(payout)));
            }
            if let Some(report) = settlement.and_then(|s| s.liquidation.as_ref()) {
                out.extend(report.transfers().map(|(who, w)| (who, signed(w))));
            }
        }
        Event::ParametersUpdated { .. } => {}
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayFault {
    #[error("operation rejected on replay: {0}")]
    Rejected(ProtocolError),
    #[error("recorded surplus Xt = {recorded} but replay computes {computed}")]
    SurplusMismatch { recorded: Wei, computed: Wei },
    #[error("recorded event {recorded} but replay emits {computed}")]
    EventMismatch { recorded: String, computed: String },
    #[error("invariant broken: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("event {ordinal}: {fault}")]
pub struct ReplayError {
    pub ordinal: u64,
    pub fault: ReplayFault,
}

impl ReplayError {
    pub fn is_invariant_violation(&self) -> bool {
        match &self.fault {
            ReplayFault::Rejected(e) => e.is_invariant_violation(),
            _ => true,
        }
    }
}

/// Result of re-executing a log.
#[derive(Debug, Clone)]
pub struct Replay {
    pub state: ContractState,
    pub rows: Vec<TrajectoryRow>,
    pub liquidations: Vec<(u64, LiquidationReport)>,
}

/// Re-executes every event of `log` on a freshly deployed contract, requiring
/// each regenerated event to equal the recorded one.
pub fn replay(log: &EventLog) -> Result<Replay, ReplayError> {
    let mut recorder = Recorder::deploy(log.header().clone());
    let owner = log.header().owner;
    for record in log.records() {
        let fail = |fault| ReplayError {
            ordinal: record.ordinal,
            fault,
        };
        let applied = match &record.event {
            Event::Fund { from, x, .. } => recorder.fund(*from, *x).map(drop),
            Event::Burn { from, y, .. } => recorder.burn(*from, *y).map(drop),
            Event::InsuranceUnderwritten {
                customer,
                event_description,
                payout_amount,
                ..
            } => recorder
                .underwrite(*customer, event_description.clone(), *payout_amount)
                .map(drop),
            Event::ClaimSettled {
                contract_id,
                payout_transferred,
                ..
            } => recorder
                .settle_with_outcome(owner, *contract_id, *payout_transferred)
                .map(drop),
            Event::ParametersUpdated {
                new_eta1,
                new_eta2,
                new_q_alpha_scr,
                new_q_alpha_mcr,
            } => recorder.update_params(
                owner,
                Params {
                    eta1: *new_eta1,
                    eta2: *new_eta2,
                    q_scr: *new_q_alpha_scr,
                    q_mcr: *new_q_alpha_mcr,
                },
            ),
        };
        applied.map_err(|e| fail(ReplayFault::Rejected(e)))?;

        let computed = &recorder.log.records().last().expect("one event per operation").event;
        if let (Event::ClaimSettled { xt: recorded, .. }, Event::ClaimSettled { xt: computed, .. }) =
            (&record.event, computed)
        {
            if recorded != computed {
                return Err(fail(ReplayFault::SurplusMismatch {
                    recorded: *recorded,
                    computed: *computed,
                }));
            }
        }
        if *computed != record.event {
            return Err(fail(ReplayFault::EventMismatch {
                recorded: serde_json::to_string(&record.event).unwrap_or_default(),
                computed: serde_json::to_string(computed).unwrap_or_default(),
            }));
        }
        recorder
            .state
            .check_invariants()
            .map_err(|e| fail(ReplayFault::Invariant(e)))?;
    }
    Ok(Replay {
        state: recorder.state,
        rows: recorder.rows,
        liquidations: recorder.liquidations,
    })
}

fn addresses<'a>(
    rows: &'a [TrajectoryRow],
    pick: impl Fn(&'a TrajectoryRow) -> Vec<&'a Address>,
) -> Vec<Address> {
    let mut seen: IndexMap<Address, ()> = IndexMap::new();
    for row in rows {
        for a in pick(row) {
            seen.entry(*a).or_default();
        }
    }
    seen.into_keys().collect()
}

/// Trajectory as CSV: `ordinal,B,X,SCR,MCR` then one token column per
/// address in first-seen order. All values are integers in base units.
pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let holders = addresses(rows, |r| r.tokens.keys().collect());
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["ordinal".to_string(), "B".into(), "X".into(), "SCR".into(), "MCR".into()];
    header.extend(holders.iter().map(|a| a.to_string()));
    out.write_record(&header).expect("in-memory write");
    for row in rows {
        let mut fields = vec![
            row.ordinal.to_string(),
            row.balance.to_string(),
            row.surplus.to_string(),
            row.scr.to_string(),
            row.mcr.to_string(),
        ];
        fields.extend(
            holders
                .iter()
                .map(|a| row.tokens.get(a).copied().unwrap_or_default().to_string()),
        );
        out.write_record(&fields).expect("in-memory write");
    }
    String::from_utf8(out.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// ETH held by the contract and by each participant after every event.
/// `wallets` gives a column label and starting balance per participant;
/// addresses seen in the trajectory but not listed get their address as label
/// and start at zero. Columns: `ordinal,contract`, then one per participant.
pub fn balances_csv(rows: &[TrajectoryRow], wallets: &[(String, Address, Wei)]) -> String {
    let mut people: IndexMap<Address, (String, Wei)> = wallets
        .iter()
        .map(|(label, a, w)| (*a, (label.clone(), *w)))
        .collect();
    for a in addresses(rows, |r| r.flows.keys().collect()) {
        people.entry(a).or_insert_with(|| (a.to_string(), Wei::ZERO));
    }
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["ordinal".to_string(), "contract".into()];
    header.extend(people.values().map(|(label, _)| label.clone()));
    out.write_record(&header).expect("in-memory write");
    for row in rows {
        let mut fields = vec![row.ordinal.to_string(), row.balance.to_string()];
        for (a, (_, start)) in &people {
            let flow = row.flows.get(a).map_or(0, |f| f.0);
            fields.push((start.0 as i128 + flow).to_string());
        }
        out.write_record(&fields).expect("in-memory write");
    }
    String::from_utf8(out.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
