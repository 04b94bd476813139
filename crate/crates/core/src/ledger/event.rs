use serde::{Deserialize, Serialize};

use crate::fixedpoint::{Myriad, TokenAmount, Wei};
use crate::oracle::EventDescription;
use crate::protocol::{Address, Params, PolicyId, PolicyStatus};

/// Protocol event. Field names follow the contract's event definitions;
/// amounts are wei or token base units, loadings and quantiles Myriad.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Event {
    ParametersUpdated {
        #[serde(rename = "newEta1")]
        new_eta1: Myriad,
        #[serde(rename = "newEta2")]
        new_eta2: Myriad,
        #[serde(rename = "newQAlphaSCR")]
        new_q_alpha_scr: Myriad,
        #[serde(rename = "newQAlphaMCR")]
        new_q_alpha_mcr: Myriad,
    },
    Fund {
        from: Address,
        x: Wei,
        y: TokenAmount,
    },
    Burn {
        from: Address,
        x: Wei,
        y: TokenAmount,
    },
    InsuranceUnderwritten {
        #[serde(rename = "contractId")]
        contract_id: PolicyId,
        customer: Address,
        #[serde(rename = "eventDescription")]
        event_description: EventDescription,
        #[serde(rename = "payoutAmount")]
        payout_amount: Wei,
        status: PolicyStatus,
    },
    ClaimSettled {
        #[serde(rename = "contractId")]
        contract_id: PolicyId,
        customer: Address,
        #[serde(rename = "payoutTransferred")]
        payout_transferred: bool,
        #[serde(rename = "Xt")]
        xt: Wei,
    },
}

impl Event {
    pub fn parameters_updated(params: &Params) -> Event {
        Event::ParametersUpdated {
            new_eta1: params.eta1,
            new_eta2: params.eta2,
            new_q_alpha_scr: params.q_scr,
            new_q_alpha_mcr: params.q_mcr,
        }
    }

    pub fn kind(&self) -> EventKind {
        match self {
            Event::ParametersUpdated { .. } => EventKind::ParametersUpdated,
            Event::Fund { .. } => EventKind::Fund,
            Event::Burn { .. } => EventKind::Burn,
            Event::InsuranceUnderwritten { .. } => EventKind::InsuranceUnderwritten,
            Event::ClaimSettled { .. } => EventKind::ClaimSettled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    ParametersUpdated,
    Fund,
    Burn,
    InsuranceUnderwritten,
    ClaimSettled,
}

/// An event with its position in the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub ordinal: u64,
    #[serde(flatten)]
    pub event: Event,
}
