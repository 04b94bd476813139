use serde::{Deserialize, Serialize};

use super::{Address, ContractState, PolicyId, PolicyStatus, ProtocolError};
use crate::fixedpoint::{mul_div, SignedAmount, TokenAmount, Wei};
use crate::riskmodel::SolvencyState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refund {
    pub policy_id: PolicyId,
    pub holder: Address,
    /// Refund owed, (1+η1)·θ·l.
    pub owed: Wei,
    pub paid: Wei,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distribution {
    pub holder: Address,
    pub tokens: TokenAmount,
    pub paid: Wei,
}

/// Every transfer made when the contract is wound down.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiquidationReport {
    /// Policy whose compensation triggered the liquidation.
    pub trigger_policy: PolicyId,
    /// Surplus after the compensation, X̃.
    pub trial_surplus: SignedAmount,
    pub mcr: SignedAmount,
    /// Σ refunds owed to open policies.
    pub refund_pool: Wei,
    /// Whether X̃ covered the refund pool in full.
    pub full_refunds: bool,
    pub refunds: Vec<Refund>,
    pub distributions: Vec<Distribution>,
    /// Contract balance when the transfers started.
    pub balance_before: Wei,
    pub total_paid: Wei,
    /// Balance left unassigned: floor residue plus the unearned participation
    /// loadings of open policies.
    pub dust: Wei,
}

impl LiquidationReport {
    /// All transfers in payment order as `(recipient, amount)`.
    pub fn transfers(&self) -> impl Iterator<Item = (Address, Wei)> + '_ {
        self.refunds
            .iter()
            .map(|r| (r.holder, r.paid))
            .chain(self.distributions.iter().map(|d| (d.holder, d.paid)))
    }
}

impl ContractState {
    /// Refunds open policies (in full when X̃ exceeds the refund pool, pro rata
    /// otherwise), hands any residue to token holders pro rata, cancels the
    /// open policies and resets balances, solvency sums and tokens.
    ///
    /// Expects the triggering payout already deducted from `balance` and the
    /// triggering policy closed.
    pub(super) fn liquidate(
        &mut self,
        trigger_policy: PolicyId,
        trial_surplus: SignedAmount,
        mcr: SignedAmount,
    ) -> Result<LiquidationReport, ProtocolError> {
        let owed: Vec<(PolicyId, Address, Wei)> = self
            .open_policies()
            .map(|p| Ok((p.id, p.holder, p.risk.refund()?)))
            .collect::<Result<_, ProtocolError>>()?;
        let refund_pool = owed
            .iter()
            .try_fold(Wei::ZERO, |acc, (_, _, r)| acc.checked_add(*r))?;
        let available = trial_surplus.clamp_to_wei();
        let full_refunds = trial_surplus > refund_pool.to_signed()?;

        let mut refunds = Vec::with_capacity(owed.len());
        let mut distributions = Vec::new();
        if full_refunds {
            refunds.extend(owed.iter().map(|&(policy_id, holder, owed)| Refund {
                policy_id,
                holder,
                owed,
                paid: owed,
            }));
            let residue = available.checked_sub(refund_pool)?;
            if !self.total_supply.is_zero() {
                for (&holder, &tokens) in &self.tokens {
                    let paid = Wei(mul_div(tokens.0, residue.0, self.total_supply.0)?);
                    distributions.push(Distribution {
                        holder,
                        tokens,
                        paid,
                    });
                }
            }
        } else {
            for &(policy_id, holder, owed) in &owed {
                let paid = if refund_pool.is_zero() {
                    Wei::ZERO
                } else {
                    Wei(mul_div(owed.0, available.0, refund_pool.0)?)
                };
                refunds.push(Refund {
                    policy_id,
                    holder,
                    owed,
                    paid,
                });
            }
        }

        let balance_before = self.balance;
        let total_paid = refunds
            .iter()
            .map(|r| r.paid)
            .chain(distributions.iter().map(|d| d.paid))
            .try_fold(Wei::ZERO, |acc, w| acc.checked_add(w))?;
        let dust = balance_before
            .checked_sub(total_paid)
            .map_err(|_| ProtocolError::PayoutExceedsBalance {
                balance: balance_before,
                payout: total_paid,
            })?;

        for policy in self.policies.iter_mut().filter(|p| p.is_open()) {
            policy.status = PolicyStatus::Canceled;
        }
        self.balance = Wei::ZERO;
        self.surplus = Wei::ZERO;
        self.solvency = SolvencyState::new(self.params.q_scr, self.params.q_mcr);
        for tokens in self.tokens.values_mut() {
            *tokens = TokenAmount::ZERO;
        }
        self.total_supply = TokenAmount::ZERO;

        Ok(LiquidationReport {
            trigger_policy,
            trial_surplus,
            mcr,
            refund_pool,
            full_refunds,
            refunds,
            distributions,
            balance_before,
            total_paid,
            dust,
        })
    }
}
