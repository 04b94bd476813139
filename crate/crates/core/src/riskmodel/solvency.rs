use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{PolicyRisk, RiskModelError};
use crate::fixedpoint::{isqrt, u256_decimal, ArithmeticError, Myriad, SignedAmount, Wei, MYRIAD, U256};

/// Which capital requirement to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Requirement {
    Scr,
    Mcr,
}

/// Terms one policy adds to the running sums. Computed once at underwriting
/// and cached with the policy, so removal subtracts exactly what was added.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RiskContribution {
    /// θ(1−θ)l², wei² scale, floored.
    #[serde(with = "u256_decimal")]
    pub variance: U256,
    /// (η1+η2)·θ·l, wei, floored.
    pub loaded_mean: Wei,
}

impl RiskContribution {
    pub fn of(risk: &PolicyRisk) -> Result<RiskContribution, ArithmeticError> {
        Ok(RiskContribution {
            variance: risk.variance()?,
            loaded_mean: risk.loaded_mean()?,
        })
    }
}

/// Sufficient statistics of the normal approximation.
///
/// `SCR ≈ √sum_var · q_scr − sum_loaded_mean`, and the same with `q_mcr`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SolvencyState {
    #[serde(with = "u256_decimal")]
    pub sum_var: U256,
    pub sum_loaded_mean: Wei,
    pub q_scr: Myriad,
    pub q_mcr: Myriad,
}

impl SolvencyState {
    pub fn new(q_scr: Myriad, q_mcr: Myriad) -> SolvencyState {
        SolvencyState {
            sum_var: U256::ZERO,
            sum_loaded_mean: Wei::ZERO,
            q_scr,
            q_mcr,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sum_var == U256::ZERO && self.sum_loaded_mean.is_zero()
    }

    pub fn add(&self, risk: &PolicyRisk) -> Result<SolvencyState, RiskModelError> {
        self.add_contribution(&RiskContribution::of(risk)?)
    }

    pub fn remove(&self, risk: &PolicyRisk) -> Result<SolvencyState, RiskModelError> {
        self.remove_contribution(&RiskContribution::of(risk)?)
    }

    pub fn add_contribution(
        &self,
        term: &RiskContribution,
    ) -> Result<SolvencyState, RiskModelError> {
        Ok(SolvencyState {
            sum_var: self
                .sum_var
                .checked_add(term.variance)
                .ok_or(ArithmeticError::Overflow)?,
            sum_loaded_mean: self.sum_loaded_mean.checked_add(term.loaded_mean)?,
            ..*self
        })
    }

    pub fn remove_contribution(
        &self,
        term: &RiskContribution,
    ) -> Result<SolvencyState, RiskModelError> {
        let sum_var = self
            .sum_var
            .checked_sub(term.variance)
            .ok_or(RiskModelError::ContributionUnderflow)?;
        let sum_loaded_mean = self
            .sum_loaded_mean
            .checked_sub(term.loaded_mean)
            .map_err(|_| RiskModelError::ContributionUnderflow)?;
        Ok(SolvencyState {
            sum_var,
            sum_loaded_mean,
            ..*self
        })
    }

    pub fn with_quantiles(&self, q_scr: Myriad, q_mcr: Myriad) -> SolvencyState {
        SolvencyState {
            q_scr,
            q_mcr,
            ..*self
        }
    }

    /// s_n = ⌊√sum_var⌋ in wei.
    pub fn standard_deviation(&self) -> Wei {
        Wei(isqrt(self.sum_var).as_u128())
    }

    /// `⌊s_n·q / 10⁴⌋ − sum_loaded_mean`. Saturates at the i128 range, far
    /// beyond any amount of ether.
    pub fn capital(&self, which: Requirement) -> SignedAmount {
        let q = match which {
            Requirement::Scr => self.q_scr,
            Requirement::Mcr => self.q_mcr,
        };
        let spread = U256::from(self.standard_deviation().0)
            .checked_mul(U256::from(q.0))
            .map(|v| v / U256::from(MYRIAD))
            .and_then(|v| i128::try_from(v).ok())
            .unwrap_or(i128::MAX);
        let loaded = i128::try_from(self.sum_loaded_mean.0).unwrap_or(i128::MAX);
        SignedAmount(spread.saturating_sub(loaded))
    }

    pub fn scr(&self) -> SignedAmount {
        self.capital(Requirement::Scr)
    }

    pub fn mcr(&self) -> SignedAmount {
        self.capital(Requirement::Mcr)
    }

    /// Unfloored `√sum_var · q − sum_loaded_mean`, in wei, for reporting.
    pub fn capital_real(&self, which: Requirement) -> f64 {
        let q = match which {
            Requirement::Scr => self.q_scr,
            Requirement::Mcr => self.q_mcr,
        };
        self.sum_var.as_f64().sqrt() * q.to_f64() - self.sum_loaded_mean.0 as f64
    }
}

/// Standard normal quantile of order `alpha`, rounded half-up to Myriad.
/// `normal_quantile(0.995)` is 2.5758.
pub fn normal_quantile(alpha: f64) -> Option<Myriad> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return None;
    }
    let normal = Normal::standard();
    Myriad::from_f64_rounded(normal.inverse_cdf(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::WEI_PER_ETH;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn risk(theta: u64, payout: u128, eta: u64) -> PolicyRisk {
        PolicyRisk::new(Myriad(theta), Wei(payout), Myriad(eta), Myriad(0))
    }

    #[test]
    fn closed_form_add() {
        let s = SolvencyState::new(Myriad(25758), Myriad(10364))
            .add(&risk(5000, 2, 0))
            .unwrap();
        assert_eq!(s.sum_var, U256::ONE);
        assert_eq!(s.sum_loaded_mean, Wei(0));
        assert_eq!(s.standard_deviation(), Wei(1));
        // 1 · 2.5758, floored to whole wei
        assert_eq!(s.scr(), SignedAmount(2));
        assert!((s.capital_real(Requirement::Scr) - 2.5758).abs() < 1e-12);
    }

    #[test]
    fn zero_payout_leaves_state() {
        let s = SolvencyState::new(Myriad(25758), Myriad(10364))
            .add(&risk(5000, 2, 0))
            .unwrap();
        assert_eq!(s.add(&risk(7000, 0, 1500)).unwrap(), s);
    }

    #[test]
    fn rain_policy_components_match_bigint() {
        // θ = 0.7164, l = 0.06 ETH, η = 0.15
        let payout = 6 * WEI_PER_ETH / 100;
        let s = SolvencyState::default()
            .add(&PolicyRisk::new(
                Myriad(7164),
                Wei(payout),
                Myriad(1000),
                Myriad(500),
            ))
            .unwrap();
        let l = BigUint::from(payout);
        let var = BigUint::from(7164u32) * BigUint::from(2836u32) * &l * &l / BigUint::from(100_000_000u32);
        let mean = BigUint::from(1500u32) * BigUint::from(7164u32) * &l / BigUint::from(100_000_000u32);
        assert_eq!(s.sum_var.to_string(), var.to_string());
        assert_eq!(BigUint::from(s.sum_loaded_mean.0), mean);
    }

    #[test]
    fn remove_from_empty_underflows() {
        assert_eq!(
            SolvencyState::default().remove(&risk(5000, 2, 0)),
            Err(RiskModelError::ContributionUnderflow)
        );
    }

    #[test]
    fn removal_is_order_independent() {
        let base = SolvencyState::new(Myriad(25758), Myriad(10364));
        let p = risk(3000, 7 * WEI_PER_ETH, 1000);
        let q = risk(8100, 3 * WEI_PER_ETH, 250);
        let via_both = base.add(&p).unwrap().add(&q).unwrap().remove(&p).unwrap();
        assert_eq!(via_both, base.add(&q).unwrap());
    }

    #[test]
    fn empty_capital_is_zero() {
        let s = SolvencyState::new(Myriad(25758), Myriad(10364));
        assert_eq!(s.scr(), SignedAmount(0));
        assert_eq!(s.mcr(), SignedAmount(0));
    }

    #[test]
    fn capital_can_go_negative() {
        let s = SolvencyState::new(Myriad(25758), Myriad(10364))
            .add(&risk(9999, WEI_PER_ETH, 5000))
            .unwrap();
        assert!(s.scr().is_negative());
        assert_eq!(s.scr().clamp_to_wei(), Wei(0));
    }

    #[test]
    fn quantiles_used_by_the_protocol() {
        assert_eq!(normal_quantile(0.995), Some(Myriad(25758)));
        assert_eq!(normal_quantile(0.85), Some(Myriad(10364)));
        assert_eq!(normal_quantile(0.985), Some(Myriad(21701)));
        assert_eq!(normal_quantile(0.99), Some(Myriad(23263)));
        assert_eq!(normal_quantile(0.4), None);
        assert_eq!(normal_quantile(1.0), None);
    }

    proptest! {
        #[test]
        fn scr_dominates_mcr(
            policies in proptest::collection::vec((0u64..10_000, 0u128..1u128 << 80, 0u64..5000), 0..30),
            q_mcr in 0u64..40_000,
            extra in 0u64..40_000,
        ) {
            let mut s = SolvencyState::new(Myriad(q_mcr + extra), Myriad(q_mcr));
            for (t, l, e) in policies {
                s = s.add(&risk(t, l, e)).unwrap();
            }
            prop_assert!(s.scr() >= s.mcr());
        }
    }
}
