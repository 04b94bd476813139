//! Off-chain reference implementation of a parametric insurance protocol:
//! integer fixed-point arithmetic, a hash-based probability oracle, the
//! solvency engine, the contract state machine, an event ledger with replay,
//! and the command-line front end.

pub mod cli;
pub mod fixedpoint;
pub mod ledger;
pub mod oracle;
pub mod protocol;
pub mod riskmodel;

use num_rational::BigRational;

pub use fixedpoint::{Myriad, SignedAmount, TokenAmount, Wei};
pub use protocol::{Address, ContractState, Params};

/// Loss distribution with double-precision weights.
pub type LossDistributionF64 = riskmodel::LossDistribution<f64>;
/// Loss distribution with single-precision weights.
pub type LossDistributionF32 = riskmodel::LossDistribution<f32>;
/// Loss distribution with exact rational weights.
pub type ExactLossDistribution = riskmodel::LossDistribution<BigRational>;
