//! The insurance contract as a deterministic state machine.
//!
//! Participants fund the contract and receive tokens, buy policies, burn
//! tokens to withdraw, and the owner settles policies and tunes parameters.
//! Every operation either fails without touching the state or commits and
//! returns the single [`Event`] it emits.
//!
//! Balances:
//!
//! * `balance` (B) is everything the contract holds.
//! * `surplus` (X) is the part backing new risk. Premiums enter B when
//!   collected and X only when earned at settlement, so
//!   `B − X = Σ premiums of open policies` at all times.
//! * The exchange rate X / Ȳ is never stored. Conversions use the live ratio,
//!   with rate 1 whenever either side is zero.

mod address;
mod liquidation;
mod snapshot;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedpoint::{mul_div, ArithmeticError, Myriad, SignedAmount, TokenAmount, Wei};
use crate::ledger::Event;
use crate::oracle::{EventDescription, ProbabilityOracle};
use crate::riskmodel::{PolicyRisk, RiskContribution, RiskModelError, SolvencyState};

pub use address::{Address, AddressError};
pub use liquidation::{Distribution, LiquidationReport, Refund};

pub type PolicyId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("payout must be positive")]
    ZeroPayout,
    #[error("caller {caller} is not the owner")]
    NotOwner { caller: Address },
    #[error("surplus {surplus} does not cover the capital requirement {required} after underwriting")]
    UnderwritingGate { surplus: Wei, required: SignedAmount },
    #[error("{holder} holds {held} tokens, cannot burn {requested}")]
    InsufficientTokens {
        holder: Address,
        held: TokenAmount,
        requested: TokenAmount,
    },
    #[error("withdrawal of {requested} exceeds the contract balance {balance}")]
    InsufficientBalance { balance: Wei, requested: Wei },
    #[error("withdrawal of {requested} would not leave the surplus above the capital requirement {required}")]
    WithdrawalGate { requested: Wei, required: SignedAmount },
    #[error("no policy with id {0}")]
    UnknownPolicy(PolicyId),
    #[error("policy {id} is already closed with status {status:?}")]
    PolicyClosed { id: PolicyId, status: PolicyStatus },
    #[error("payout {payout} exceeds the contract balance {balance}")]
    PayoutExceedsBalance { balance: Wei, payout: Wei },
    #[error(transparent)]
    Risk(#[from] RiskModelError),
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
}

impl ProtocolError {
    /// Errors a consistent state can never produce.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            ProtocolError::PayoutExceedsBalance { .. }
                | ProtocolError::Risk(RiskModelError::ContributionUnderflow)
                | ProtocolError::Arithmetic(ArithmeticError::Underflow)
        )
    }
}

/// Loadings and normal quantiles, all at Myriad scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Params {
    pub eta1: Myriad,
    pub eta2: Myriad,
    pub q_scr: Myriad,
    pub q_mcr: Myriad,
}

impl Default for Params {
    /// η1 = 0.1, η2 = 0.05, q(0.995) = 2.5758, q(0.85) = 1.0364.
    fn default() -> Params {
        Params {
            eta1: Myriad(1000),
            eta2: Myriad(500),
            q_scr: Myriad(25758),
            q_mcr: Myriad(10364),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum PolicyStatus {
    Open = 0,
    ClosedNotCompensated = 1,
    ClosedCompensated = 2,
    Canceled = 3,
}

impl From<PolicyStatus> for u8 {
    fn from(s: PolicyStatus) -> u8 {
        s as u8
    }
}

impl TryFrom<u8> for PolicyStatus {
    type Error = String;

    fn try_from(v: u8) -> Result<PolicyStatus, String> {
        match v {
            0 => Ok(PolicyStatus::Open),
            1 => Ok(PolicyStatus::ClosedNotCompensated),
            2 => Ok(PolicyStatus::ClosedCompensated),
            3 => Ok(PolicyStatus::Canceled),
            other => Err(format!("unknown policy status {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub id: PolicyId,
    pub holder: Address,
    pub description: EventDescription,
    pub risk: PolicyRisk,
    /// Commercial premium paid, ⌊(10⁴+η1+η2)·θ·l / 10⁸⌋.
    pub premium: Wei,
    /// Terms added to the solvency sums, subtracted verbatim at settlement.
    pub contribution: RiskContribution,
    pub status: PolicyStatus,
    pub underwritten_at: u64,
}

impl PolicyRecord {
    pub fn is_open(&self) -> bool {
        self.status == PolicyStatus::Open
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settlement {
    pub compensated: bool,
    pub liquidation: Option<LiquidationReport>,
}

/// Complete contract state. A plain value: clone it to snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractState {
    pub owner: Address,
    pub balance: Wei,
    pub surplus: Wei,
    pub policies: Vec<PolicyRecord>,
    /// Token holdings in first-seen order. Entries persist at zero.
    pub tokens: IndexMap<Address, TokenAmount>,
    pub total_supply: TokenAmount,
    pub solvency: SolvencyState,
    pub params: Params,
    /// Logical clock, one tick per accepted operation.
    pub clock: u64,
}

impl ContractState {
    pub fn deploy(owner: Address, params: Params) -> ContractState {
        ContractState {
            owner,
            balance: Wei::ZERO,
            surplus: Wei::ZERO,
            policies: Vec::new(),
            tokens: IndexMap::new(),
            total_supply: TokenAmount::ZERO,
            solvency: SolvencyState::new(params.q_scr, params.q_mcr),
            params,
            clock: 0,
        }
    }

    pub fn scr(&self) -> SignedAmount {
        self.solvency.scr()
    }

    pub fn mcr(&self) -> SignedAmount {
        self.solvency.mcr()
    }

    /// Number of distinct addresses that ever paid into the contract.
    pub fn holders_ever(&self) -> usize {
        self.tokens.len()
    }

    pub fn policies_ever(&self) -> usize {
        self.policies.len()
    }

    pub fn tokens_of(&self, holder: &Address) -> TokenAmount {
        self.tokens.get(holder).copied().unwrap_or_default()
    }

    pub fn policy(&self, id: PolicyId) -> Option<&PolicyRecord> {
        let index = usize::try_from(id.checked_sub(1)?).ok()?;
        self.policies.get(index)
    }

    pub fn open_policies(&self) -> impl Iterator<Item = &PolicyRecord> {
        self.policies.iter().filter(|p| p.is_open())
    }

    /// Σ premiums of open policies; equals `balance − surplus`.
    pub fn unearned_premiums(&self) -> Result<Wei, ArithmeticError> {
        self.open_policies()
            .try_fold(Wei::ZERO, |acc, p| acc.checked_add(p.premium))
    }

    /// Tokens issued for `amount` wei at the live rate X / Ȳ.
    pub fn tokens_for(&self, amount: Wei) -> Result<TokenAmount, ArithmeticError> {
        if self.total_supply.is_zero() || self.surplus.is_zero() {
            return Ok(TokenAmount(amount.0));
        }
        mul_div(amount.0, self.total_supply.0, self.surplus.0).map(TokenAmount)
    }

    /// Surplus per token as a float, for display only.
    pub fn exchange_rate(&self) -> f64 {
        if self.total_supply.is_zero() || self.surplus.is_zero() {
            1.0
        } else {
            self.surplus.0 as f64 / self.total_supply.0 as f64
        }
    }

    fn require_owner(&self, caller: Address) -> Result<(), ProtocolError> {
        if caller != self.owner {
            return Err(ProtocolError::NotOwner { caller });
        }
        Ok(())
    }

    fn credit_tokens(&mut self, holder: Address, amount: TokenAmount) {
        let slot = self.tokens.entry(holder).or_default();
        *slot = TokenAmount(slot.0 + amount.0);
        self.total_supply = TokenAmount(self.total_supply.0 + amount.0);
    }

    fn checked_token_credit(&self, holder: &Address, amount: TokenAmount) -> Result<(), ArithmeticError> {
        self.tokens_of(holder).checked_add(amount)?;
        self.total_supply.checked_add(amount)?;
        Ok(())
    }

    pub fn fund(&mut self, from: Address, x: Wei) -> Result<(TokenAmount, Event), ProtocolError> {
        if x.is_zero() {
            return Err(ProtocolError::ZeroAmount);
        }
        let minted = self.tokens_for(x)?;
        let balance = self.balance.checked_add(x)?;
        let surplus = self.surplus.checked_add(x)?;
        self.checked_token_credit(&from, minted)?;

        self.balance = balance;
        self.surplus = surplus;
        self.credit_tokens(from, minted);
        self.clock += 1;
        Ok((minted, Event::Fund { from, x, y: minted }))
    }

    /// Underwrites a policy, reading θ from `oracle`.
    pub fn underwrite(
        &mut self,
        customer: Address,
        description: EventDescription,
        payout: Wei,
        oracle: &impl ProbabilityOracle,
    ) -> Result<(PolicyId, Event), ProtocolError> {
        let theta = oracle.probability(&description);
        self.underwrite_with_probability(customer, description, theta, payout)
    }

    pub fn underwrite_with_probability(
        &mut self,
        customer: Address,
        description: EventDescription,
        theta: Myriad,
        payout: Wei,
    ) -> Result<(PolicyId, Event), ProtocolError> {
        if payout.is_zero() {
            return Err(ProtocolError::ZeroPayout);
        }
        let risk = PolicyRisk::new(theta, payout, self.params.eta1, self.params.eta2);
        let contribution = RiskContribution::of(&risk)?;
        let candidate = self.solvency.add_contribution(&contribution)?;
        let required = candidate.scr();
        if self.surplus < required.clamp_to_wei() {
            return Err(ProtocolError::UnderwritingGate {
                surplus: self.surplus,
                required,
            });
        }
        let premium = risk.premium()?;
        let balance = self.balance.checked_add(premium)?;
        let minted = self.tokens_for(risk.participation()?)?;
        self.checked_token_credit(&customer, minted)?;

        let id = self.policies.len() as PolicyId + 1;
        self.policies.push(PolicyRecord {
            id,
            holder: customer,
            description: description.clone(),
            risk,
            premium,
            contribution,
            status: PolicyStatus::Open,
            underwritten_at: self.clock,
        });
        self.balance = balance;
        self.solvency = candidate;
        self.credit_tokens(customer, minted);
        self.clock += 1;
        let event = Event::InsuranceUnderwritten {
            contract_id: id,
            customer,
            event_description: description,
            payout_amount: payout,
            status: PolicyStatus::Open,
        };
        Ok((id, event))
    }

    /// Wei paid for burning `y` tokens, if the withdrawal conditions hold:
    /// enough tokens, enough balance, and `x < X − SCR` (`x ≤ X` when the
    /// requirement is not positive).
    pub fn burn_quote(&self, from: &Address, y: TokenAmount) -> Result<Wei, ProtocolError> {
        if y.is_zero() {
            return Err(ProtocolError::ZeroAmount);
        }
        let held = self.tokens_of(from);
        if y > held {
            return Err(ProtocolError::InsufficientTokens {
                holder: *from,
                held,
                requested: y,
            });
        }
        let x = Wei(mul_div(y.0, self.surplus.0, self.total_supply.0)?);
        if x > self.balance {
            return Err(ProtocolError::InsufficientBalance {
                balance: self.balance,
                requested: x,
            });
        }
        // Strict while a positive requirement is held; a zero requirement lets
        // the whole surplus go.
        let required = self.scr();
        let floor = required.clamp_to_wei();
        let blocked = if floor.is_zero() {
            x > self.surplus
        } else {
            x.0 >= self.surplus.0.saturating_sub(floor.0)
        };
        if blocked {
            return Err(ProtocolError::WithdrawalGate {
                requested: x,
                required,
            });
        }
        Ok(x)
    }

    /// Largest token amount `from` can burn right now (zero if none).
    pub fn max_burnable(&self, from: &Address) -> TokenAmount {
        let (mut lo, mut hi) = (0u128, self.tokens_of(from).0);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if self.burn_quote(from, TokenAmount(mid)).is_ok() {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        TokenAmount(lo)
    }

    pub fn burn(&mut self, from: Address, y: TokenAmount) -> Result<(Wei, Event), ProtocolError> {
        let x = self.burn_quote(&from, y)?;
        self.balance = self.balance.checked_sub(x)?;
        self.surplus = self.surplus.checked_sub(x)?;
        let slot = self.tokens.entry(from).or_default();
        *slot = TokenAmount(slot.0 - y.0);
        self.total_supply = TokenAmount(self.total_supply.0 - y.0);
        self.clock += 1;
        Ok((x, Event::Burn { from, x, y }))
    }

    pub fn update_params(&mut self, caller: Address, params: Params) -> Result<Event, ProtocolError> {
        self.require_owner(caller)?;
        self.params = params;
        self.solvency = self.solvency.with_quantiles(params.q_scr, params.q_mcr);
        self.clock += 1;
        Ok(Event::parameters_updated(&params))
    }

    /// Settles policy `id` against the observed event.
    pub fn settle(
        &mut self,
        caller: Address,
        id: PolicyId,
        observed: &EventDescription,
        oracle: &impl ProbabilityOracle,
    ) -> Result<(Settlement, Event), ProtocolError> {
        self.require_owner(caller)?;
        let policy = self.open_policy(id)?;
        let compensated = oracle.is_compensated(&policy.description, observed);
        self.settle_with_outcome(caller, id, compensated)
    }

    fn open_policy(&self, id: PolicyId) -> Result<&PolicyRecord, ProtocolError> {
        let policy = self.policy(id).ok_or(ProtocolError::UnknownPolicy(id))?;
        if !policy.is_open() {
            return Err(ProtocolError::PolicyClosed {
                id,
                status: policy.status,
            });
        }
        Ok(policy)
    }

    /// Settlement with a known outcome. Without compensation the premium is
    /// earned. With compensation the payout leaves the contract, and if the
    /// resulting surplus is at or below the MCR of the remaining portfolio the
    /// contract is liquidated and reset.
    pub fn settle_with_outcome(
        &mut self,
        caller: Address,
        id: PolicyId,
        compensated: bool,
    ) -> Result<(Settlement, Event), ProtocolError> {
        self.require_owner(caller)?;
        let policy = self.open_policy(id)?.clone();
        let index = (id - 1) as usize;
        let solvency = self.solvency.remove_contribution(&policy.contribution)?;
        let payout = policy.risk.payout;

        if !compensated {
            let surplus = self.surplus.checked_add(policy.premium)?;
            self.solvency = solvency;
            self.surplus = surplus;
            self.policies[index].status = PolicyStatus::ClosedNotCompensated;
            self.clock += 1;
            let event = Event::ClaimSettled {
                contract_id: id,
                customer: policy.holder,
                payout_transferred: false,
                xt: surplus,
            };
            return Ok((
                Settlement {
                    compensated: false,
                    liquidation: None,
                },
                event,
            ));
        }

        if self.balance < payout {
            return Err(ProtocolError::PayoutExceedsBalance {
                balance: self.balance,
                payout,
            });
        }
        let balance = self.balance.checked_sub(payout)?;
        // X̃ = X − l + π, may be negative
        let trial_surplus = SignedAmount(
            self.surplus.to_signed()?.0 - payout.to_signed()?.0 + policy.premium.to_signed()?.0,
        );
        let mcr = solvency.mcr();
        let survives = trial_surplus > SignedAmount(mcr.0.max(0));

        if survives {
            self.balance = balance;
            self.surplus = trial_surplus.clamp_to_wei();
            self.solvency = solvency;
            self.policies[index].status = PolicyStatus::ClosedCompensated;
            self.clock += 1;
            let event = Event::ClaimSettled {
                contract_id: id,
                customer: policy.holder,
                payout_transferred: true,
                xt: self.surplus,
            };
            return Ok((
                Settlement {
                    compensated: true,
                    liquidation: None,
                },
                event,
            ));
        }

        let mut next = self.clone();
        next.balance = balance;
        next.solvency = solvency;
        next.policies[index].status = PolicyStatus::ClosedCompensated;
        let report = next.liquidate(id, trial_surplus, mcr)?;
        next.clock += 1;
        *self = next;
        let event = Event::ClaimSettled {
            contract_id: id,
            customer: policy.holder,
            payout_transferred: true,
            xt: self.surplus,
        };
        Ok((
            Settlement {
                compensated: true,
                liquidation: Some(report),
            },
            event,
        ))
    }

    /// Checks the accounting identities; used by tests and replay.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.balance < self.surplus {
            return Err(format!("balance {} below surplus {}", self.balance, self.surplus));
        }
        let unearned = self.unearned_premiums().map_err(|e| e.to_string())?;
        if self.balance.0 - self.surplus.0 != unearned.0 {
            return Err(format!(
                "balance − surplus = {} but open premiums sum to {}",
                self.balance.0 - self.surplus.0,
                unearned
            ));
        }
        let supply: u128 = self.tokens.values().map(|t| t.0).sum();
        if supply != self.total_supply.0 {
            return Err(format!(
                "total supply {} but holdings sum to {supply}",
                self.total_supply
            ));
        }
        Ok(())
    }
}
