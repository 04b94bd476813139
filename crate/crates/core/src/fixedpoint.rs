//! Integer arithmetic with EVM semantics.
//!
//! Every monetary quantity in the protocol is an unsigned integer at a fixed
//! scale. Divisions floor, overflow is an error, and nothing touches floating
//! point. Two scales are in use:
//!
//! * [`Wei`] and [`TokenAmount`]: base units of 10⁻¹⁸.
//! * [`Myriad`]: base units of 10⁻⁴, for probabilities, loadings and normal
//!   quantiles.
//!
//! Products of two Myriad factors with a Wei amount are divided by
//! [`MYRIAD_SQ`] to land back on the Wei scale. Variance accumulators live on
//! the Wei² scale in a [`U256`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use ethnum::U256;

/// One unit at Myriad scale.
pub const MYRIAD: u64 = 10_000;
/// Scale divisor for `myriad · myriad · amount` products.
pub const MYRIAD_SQ: u128 = 100_000_000;
/// Wei per ETH, also token base units per token.
pub const WEI_PER_ETH: u128 = 1_000_000_000_000_000_000;

const ETH_DECIMALS: usize = 18;
const MYRIAD_DECIMALS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ArithmeticError {
    #[error("arithmetic overflow")]
    Overflow,
    #[error("arithmetic underflow")]
    Underflow,
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseAmountError {
    #[error("empty amount")]
    Empty,
    #[error("invalid digit in amount `{0}`")]
    InvalidDigit(String),
    #[error("amount `{0}` has more than {1} fractional digits")]
    TooPrecise(String, usize),
    #[error("amount `{0}` does not fit the integer range")]
    OutOfRange(String),
}

/// Parses an unsigned decimal string into an integer at `decimals` scale,
/// exactly. `"0.06"` at 18 decimals is `60000000000000000`.
fn parse_scaled(text: &str, decimals: usize) -> Result<u128, ParseAmountError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ParseAmountError::Empty);
    }
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(ParseAmountError::InvalidDigit(text.to_owned()));
    }
    let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return Err(ParseAmountError::InvalidDigit(text.to_owned()));
    }
    if frac_part.len() > decimals {
        return Err(ParseAmountError::TooPrecise(text.to_owned(), decimals));
    }
    let out_of_range = || ParseAmountError::OutOfRange(text.to_owned());
    let scale = 10u128.pow(decimals as u32);
    let int_value: u128 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| out_of_range())?
    };
    let mut frac_value: u128 = 0;
    for b in frac_part.bytes() {
        frac_value = frac_value * 10 + u128::from(b - b'0');
    }
    frac_value *= 10u128.pow((decimals - frac_part.len()) as u32);
    int_value
        .checked_mul(scale)
        .and_then(|v| v.checked_add(frac_value))
        .ok_or_else(out_of_range)
}

fn format_scaled(value: u128, decimals: usize) -> String {
    let scale = 10u128.pow(decimals as u32);
    let int_part = value / scale;
    let frac = value % scale;
    if frac == 0 {
        return int_part.to_string();
    }
    let frac = format!("{frac:0width$}", width = decimals);
    format!("{int_part}.{}", frac.trim_end_matches('0'))
}

macro_rules! decimal_string_serde {
    ($ty:ident, $inner:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(&self.0)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let text = String::deserialize(deserializer)?;
                text.parse::<$inner>()
                    .map($ty)
                    .map_err(serde::de::Error::custom)
            }
        }
    };
}

/// An ETH amount in wei.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Wei(pub u128);

decimal_string_serde!(Wei, u128);

impl Wei {
    pub const ZERO: Wei = Wei(0);

    pub fn from_eth(eth: u128) -> Result<Wei, ArithmeticError> {
        eth.checked_mul(WEI_PER_ETH)
            .map(Wei)
            .ok_or(ArithmeticError::Overflow)
    }

    /// Exact conversion of a decimal ETH string, at most 18 fractional digits.
    pub fn from_eth_str(text: &str) -> Result<Wei, ParseAmountError> {
        parse_scaled(text, ETH_DECIMALS).map(Wei)
    }

    pub fn to_eth_string(self) -> String {
        format_scaled(self.0, ETH_DECIMALS)
    }

    pub fn checked_add(self, rhs: Wei) -> Result<Wei, ArithmeticError> {
        self.0
            .checked_add(rhs.0)
            .map(Wei)
            .ok_or(ArithmeticError::Overflow)
    }

    pub fn checked_sub(self, rhs: Wei) -> Result<Wei, ArithmeticError> {
        self.0
            .checked_sub(rhs.0)
            .map(Wei)
            .ok_or(ArithmeticError::Underflow)
    }

    pub fn to_signed(self) -> Result<SignedAmount, ArithmeticError> {
        i128::try_from(self.0)
            .map(SignedAmount)
            .map_err(|_| ArithmeticError::Overflow)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Wei {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Protocol token amount, 10¹⁸ base units per token.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenAmount(pub u128);

decimal_string_serde!(TokenAmount, u128);

impl TokenAmount {
    pub const ZERO: TokenAmount = TokenAmount(0);

    pub fn from_tokens_str(text: &str) -> Result<TokenAmount, ParseAmountError> {
        parse_scaled(text, ETH_DECIMALS).map(TokenAmount)
    }

    pub fn to_tokens_string(self) -> String {
        format_scaled(self.0, ETH_DECIMALS)
    }

    pub fn checked_add(self, rhs: TokenAmount) -> Result<TokenAmount, ArithmeticError> {
        self.0
            .checked_add(rhs.0)
            .map(TokenAmount)
            .ok_or(ArithmeticError::Overflow)
    }

    pub fn checked_sub(self, rhs: TokenAmount) -> Result<TokenAmount, ArithmeticError> {
        self.0
            .checked_sub(rhs.0)
            .map(TokenAmount)
            .ok_or(ArithmeticError::Underflow)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for TokenAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Signed amount at wei scale. Only capital requirements use it: the normal
/// approximation goes negative when loadings exceed the quantile term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedAmount(pub i128);

decimal_string_serde!(SignedAmount, i128);

impl SignedAmount {
    pub const ZERO: SignedAmount = SignedAmount(0);

    /// Requirement as used by the solvency gates: negative behaves as zero.
    pub fn clamp_to_wei(self) -> Wei {
        Wei(self.0.max(0) as u128)
    }

    pub fn checked_sub(self, rhs: SignedAmount) -> Result<SignedAmount, ArithmeticError> {
        self.0
            .checked_sub(rhs.0)
            .map(SignedAmount)
            .ok_or(ArithmeticError::Overflow)
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn to_eth_string(self) -> String {
        let magnitude = format_scaled(self.0.unsigned_abs(), ETH_DECIMALS);
        if self.0 < 0 {
            format!("-{magnitude}")
        } else {
            magnitude
        }
    }
}

impl fmt::Display for SignedAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Fixed point with four decimals: `Myriad(7164)` is 0.7164.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Myriad(pub u64);

impl Myriad {
    pub const ZERO: Myriad = Myriad(0);
    pub const ONE: Myriad = Myriad(MYRIAD);
    /// Largest value a probability may take.
    pub const MAX_PROBABILITY: Myriad = Myriad(MYRIAD - 1);

    pub fn is_probability(self) -> bool {
        self <= Self::MAX_PROBABILITY
    }

    /// `1 − self`, for probabilities.
    pub fn complement(self) -> Myriad {
        Myriad(MYRIAD.saturating_sub(self.0))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / MYRIAD as f64
    }

    /// Rounds half-up to the nearest representable value.
    pub fn from_f64_rounded(value: f64) -> Option<Myriad> {
        if !value.is_finite() || value < 0.0 {
            return None;
        }
        let scaled = (value * MYRIAD as f64 + 0.5).floor();
        if scaled > u64::MAX as f64 {
            return None;
        }
        Some(Myriad(scaled as u64))
    }

    pub fn to_decimal_string(self) -> String {
        format_scaled(u128::from(self.0), MYRIAD_DECIMALS)
    }
}

impl FromStr for Myriad {
    type Err = ParseAmountError;

    /// Parses a decimal such as `"2.5758"`; more than four fractional digits
    /// is an error.
    fn from_str(text: &str) -> Result<Myriad, ParseAmountError> {
        let value = parse_scaled(text, MYRIAD_DECIMALS)?;
        u64::try_from(value)
            .map(Myriad)
            .map_err(|_| ParseAmountError::OutOfRange(text.to_owned()))
    }
}

impl fmt::Display for Myriad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Floor of the square root: the largest `r` with `r² ≤ n`.
///
/// Newton iteration from an initial guess that is a power of two above the
/// root, so the sequence decreases monotonically to the floor.
pub fn isqrt(n: U256) -> U256 {
    if n < U256::new(2) {
        return n;
    }
    let bits = 256 - n.leading_zeros();
    let mut x = U256::ONE << bits.div_ceil(2);
    loop {
        let y = (x + n / x) >> 1;
        if y >= x {
            return x;
        }
        x = y;
    }
}

pub fn isqrt_u128(n: u128) -> u128 {
    isqrt(U256::from(n)).as_u128()
}

/// `floor(a·b / d)` with a 256-bit intermediate product.
pub fn mul_div(a: u128, b: u128, d: u128) -> Result<u128, ArithmeticError> {
    if d == 0 {
        return Err(ArithmeticError::DivisionByZero);
    }
    let q = U256::from(a) * U256::from(b) / U256::from(d);
    u128::try_from(q).map_err(|_| ArithmeticError::Overflow)
}

/// `floor(m1·m2·amount / 10⁸)`: two Myriad factors applied to a wei amount.
pub fn myriad_product(m1: Myriad, m2: Myriad, amount: Wei) -> Result<Wei, ArithmeticError> {
    let factors = U256::from(m1.0)
        .checked_mul(U256::from(m2.0))
        .ok_or(ArithmeticError::Overflow)?;
    let product = factors
        .checked_mul(U256::from(amount.0))
        .ok_or(ArithmeticError::Overflow)?;
    u128::try_from(product / U256::from(MYRIAD_SQ))
        .map(Wei)
        .map_err(|_| ArithmeticError::Overflow)
}

/// `floor(θ·(10⁴ − θ)·l² / 10⁸)`: the Bernoulli payout variance θ(1−θ)l² at
/// wei² scale.
pub fn bernoulli_variance(theta: Myriad, payout: Wei) -> Result<U256, ArithmeticError> {
    let theta_part = U256::from(theta.0) * U256::from(theta.complement().0);
    let payout_sq = U256::from(payout.0) * U256::from(payout.0);
    theta_part
        .checked_mul(payout_sq)
        .map(|v| v / U256::from(MYRIAD_SQ))
        .ok_or(ArithmeticError::Overflow)
}

/// Serde adapter writing a [`U256`] as a decimal string.
pub mod u256_decimal {
    use super::U256;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &U256, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(value)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<U256, D::Error> {
        let text = String::deserialize(deserializer)?;
        U256::from_str_radix(&text, 10).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn u256_from_big(n: &BigUint) -> U256 {
        let bytes = n.to_bytes_le();
        let mut buf = [0u8; 32];
        buf[..bytes.len()].copy_from_slice(&bytes);
        U256::from_le_bytes(buf)
    }

    fn big_from_u256(n: U256) -> BigUint {
        BigUint::from_bytes_le(&n.to_le_bytes())
    }

    #[test]
    fn isqrt_examples() {
        assert_eq!(isqrt(U256::ZERO), U256::ZERO);
        assert_eq!(isqrt(U256::ONE), U256::ONE);
        let e36 = U256::from(10u128.pow(36));
        assert_eq!(isqrt(e36), U256::from(10u128.pow(18)));
        // r = 1414213562373095048: r² ≤ 2·10³⁶ < (r+1)², checked by direct multiplication
        let n = BigUint::from(2u32) * BigUint::from(10u32).pow(36);
        let r = BigUint::from(1414213562373095048u64);
        assert!(&r * &r <= n);
        assert!((&r + 1u32) * (&r + 1u32) > n);
        assert_eq!(isqrt(u256_from_big(&n)), u256_from_big(&r));
        assert_eq!(isqrt(U256::MAX), U256::from(u128::MAX));
    }

    #[test]
    fn mul_div_examples() {
        assert_eq!(mul_div(5, 3, 2), Ok(7));
        assert_eq!(mul_div(123_456, 77, 77), Ok(123_456));
        let e18 = 10u128.pow(18);
        assert_eq!(mul_div(e18, e18, e18), Ok(e18));
        assert_eq!(mul_div(u128::MAX, u128::MAX, u128::MAX), Ok(u128::MAX));
        assert_eq!(mul_div(1, 1, 0), Err(ArithmeticError::DivisionByZero));
        assert_eq!(mul_div(u128::MAX, 2, 1), Err(ArithmeticError::Overflow));
    }

    #[test]
    fn eth_strings() {
        assert_eq!(Wei::from_eth_str("0.06").unwrap(), Wei(60_000_000_000_000_000));
        assert_eq!(Wei::from_eth_str("1").unwrap(), Wei(WEI_PER_ETH));
        assert_eq!(Wei::from_eth_str(".5").unwrap(), Wei(WEI_PER_ETH / 2));
        assert_eq!(
            Wei::from_eth_str("0.000000000000000001").unwrap(),
            Wei(1)
        );
        assert!(matches!(
            Wei::from_eth_str("0.0000000000000000001"),
            Err(ParseAmountError::TooPrecise(..))
        ));
        assert!(Wei::from_eth_str("-1").is_err());
        assert!(Wei::from_eth_str("1e3").is_err());
        assert!(Wei::from_eth_str("").is_err());
        assert!(Wei::from_eth_str(".").is_err());
        assert_eq!(Wei(60_000_000_000_000_000).to_eth_string(), "0.06");
        assert_eq!(Wei(2 * WEI_PER_ETH).to_eth_string(), "2");
    }

    #[test]
    fn myriad_strings() {
        assert_eq!("2.5758".parse::<Myriad>().unwrap(), Myriad(25758));
        assert_eq!("0.1".parse::<Myriad>().unwrap(), Myriad(1000));
        assert!("0.12345".parse::<Myriad>().is_err());
        assert_eq!(Myriad(315).to_decimal_string(), "0.0315");
        assert_eq!(Myriad::from_f64_rounded(2.575829), Some(Myriad(25758)));
        assert_eq!(Myriad::from_f64_rounded(-0.1), None);
    }

    #[test]
    fn scaled_products() {
        // 1.15 · 0.7164 · 0.06 ETH
        let premium = myriad_product(
            Myriad(11_500),
            Myriad(7164),
            Wei::from_eth_str("0.06").unwrap(),
        )
        .unwrap();
        assert_eq!(premium, Wei(49_431_600_000_000_000));
        assert_eq!(bernoulli_variance(Myriad(5000), Wei(2)).unwrap(), U256::ONE);
        assert_eq!(bernoulli_variance(Myriad(0), Wei(10)).unwrap(), U256::ZERO);
    }

    #[test]
    fn signed_clamp() {
        assert_eq!(SignedAmount(-5).clamp_to_wei(), Wei(0));
        assert_eq!(SignedAmount(5).clamp_to_wei(), Wei(5));
    }

    proptest! {
        #[test]
        fn isqrt_brackets_root(words in any::<[u128; 2]>(), shift in 0u32..256) {
            let n = (U256::from_words(words[0], words[1])) >> shift;
            let r = isqrt(n);
            let big_n = big_from_u256(n);
            let big_r = big_from_u256(r);
            prop_assert!(&big_r * &big_r <= big_n);
            prop_assert!((&big_r + 1u32) * (&big_r + 1u32) > big_n);
        }

        #[test]
        fn mul_div_matches_bigint(a: u128, b: u128, d in 1u128..) {
            let exact = BigUint::from(a) * BigUint::from(b) / BigUint::from(d);
            match mul_div(a, b, d) {
                Ok(q) => prop_assert_eq!(BigUint::from(q), exact),
                Err(e) => {
                    prop_assert_eq!(e, ArithmeticError::Overflow);
                    prop_assert!(exact > BigUint::from(u128::MAX));
                }
            }
        }

        #[test]
        fn eth_string_roundtrip(v: u128) {
            let w = Wei(v);
            prop_assert_eq!(Wei::from_eth_str(&w.to_eth_string()).unwrap(), w);
        }
    }
}
