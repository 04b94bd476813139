//! Aggregate loss of the open portfolio and the solvency capitals.
//!
//! Two backends:
//!
//! * [`distribution`]: the exact law of the aggregate loss (brute-force
//!   enumeration and the De Pril recursion) with a bisection quantile. Generic
//!   over the probability weight type.
//! * [`solvency`]: the normal approximation, kept as two running integer sums
//!   so underwriting and settlement update the capitals in O(1).

pub mod distribution;
pub mod solvency;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixedpoint::{
    bernoulli_variance, myriad_product, ArithmeticError, Myriad, Wei, MYRIAD, U256,
};

pub use distribution::{
    brute_force_pmf, de_pril_pmf, exact_scr, exact_scr_with, quantile, LossDistribution, Weight,
};
pub use solvency::{normal_quantile, Requirement, RiskContribution, SolvencyState};

/// Largest portfolio the enumeration oracle accepts.
pub const MAX_BRUTE_FORCE_POLICIES: usize = 20;
/// Largest payout grid the exact backends accept.
pub const MAX_GRID_POINTS: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RiskModelError {
    #[error("portfolio of {0} policies exceeds the enumeration limit of {MAX_BRUTE_FORCE_POLICIES}")]
    PortfolioTooLarge(usize),
    #[error("payout grid of {0} points exceeds the limit of {MAX_GRID_POINTS}")]
    GridTooLarge(u128),
    #[error("policy {index} has probability {theta} outside [0, 1); treat a certain payout as a deterministic liability")]
    DegenerateProbability { index: usize, theta: Myriad },
    #[error("quantile level {0} must lie strictly between 0 and 10000")]
    InvalidLevel(Myriad),
    #[error("probability of zero loss underflowed; portfolio is too large for this weight type")]
    Underflow,
    #[error("solvency state underflow: contribution was never added")]
    ContributionUnderflow,
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
}

/// Risk characteristics of one policy: claim probability, payout and the
/// loadings frozen when it was underwritten.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyRisk {
    pub theta: Myriad,
    pub payout: Wei,
    pub eta1: Myriad,
    pub eta2: Myriad,
}

impl PolicyRisk {
    pub fn new(theta: Myriad, payout: Wei, eta1: Myriad, eta2: Myriad) -> PolicyRisk {
        PolicyRisk {
            theta,
            payout,
            eta1,
            eta2,
        }
    }

    pub fn loading(&self) -> Result<Myriad, ArithmeticError> {
        self.eta1
            .0
            .checked_add(self.eta2.0)
            .map(Myriad)
            .ok_or(ArithmeticError::Overflow)
    }

    /// Pure premium θ·l.
    pub fn pure_premium(&self) -> Result<Wei, ArithmeticError> {
        myriad_product(Myriad::ONE, self.theta, self.payout)
    }

    /// Commercial premium (1 + η1 + η2)·θ·l.
    pub fn premium(&self) -> Result<Wei, ArithmeticError> {
        let factor = self
            .loading()?
            .0
            .checked_add(MYRIAD)
            .ok_or(ArithmeticError::Overflow)?;
        myriad_product(Myriad(factor), self.theta, self.payout)
    }

    /// Premium refunded on cancellation: (1 + η1)·θ·l, without the
    /// participation loading that was paid out as tokens.
    pub fn refund(&self) -> Result<Wei, ArithmeticError> {
        let factor = self
            .eta1
            .0
            .checked_add(MYRIAD)
            .ok_or(ArithmeticError::Overflow)?;
        myriad_product(Myriad(factor), self.theta, self.payout)
    }

    /// Participation loading η2·θ·l, converted to tokens for the holder.
    pub fn participation(&self) -> Result<Wei, ArithmeticError> {
        myriad_product(self.eta2, self.theta, self.payout)
    }

    /// Variance θ(1−θ)l² at wei² scale.
    pub fn variance(&self) -> Result<U256, ArithmeticError> {
        bernoulli_variance(self.theta, self.payout)
    }

    /// Loaded mean (η1 + η2)·θ·l.
    pub fn loaded_mean(&self) -> Result<Wei, ArithmeticError> {
        myriad_product(self.loading()?, self.theta, self.payout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn premium_components() {
        let risk = PolicyRisk::new(
            Myriad(7164),
            Wei::from_eth_str("0.06").unwrap(),
            Myriad(1000),
            Myriad(500),
        );
        assert_eq!(risk.premium().unwrap(), Wei(49_431_600_000_000_000));
        assert_eq!(risk.refund().unwrap(), Wei(47_282_400_000_000_000));
        assert_eq!(risk.participation().unwrap(), Wei(2_149_200_000_000_000));
        assert_eq!(risk.loaded_mean().unwrap(), Wei(6_447_600_000_000_000));
    }
}
