use std::collections::BTreeMap;
use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

use super::{PolicyRisk, RiskModelError, MAX_BRUTE_FORCE_POLICIES, MAX_GRID_POINTS};
use crate::fixedpoint::{Myriad, SignedAmount, Wei, MYRIAD};

/// Probability weight: any exact or floating number type with the four field
/// operations and conversions from integers.
pub trait Weight: Num + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive {}

impl<T> Weight for T where T: Num + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive {}

fn from_u128<T: Weight>(n: u128) -> T {
    T::from_u128(n).expect("weight type represents integers")
}

/// `m / 10⁴` in the weight type.
pub fn weight_from_myriad<T: Weight>(m: Myriad) -> T {
    from_u128::<T>(u128::from(m.0)) / from_u128::<T>(u128::from(MYRIAD))
}

/// Probability mass function of the aggregate loss on integer wei levels.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDistribution<T> {
    support: Vec<u128>,
    mass: Vec<T>,
}

impl<T: Weight> LossDistribution<T> {
    /// Builds a distribution from `(level, mass)` pairs with ascending levels.
    pub fn from_parts(support: Vec<u128>, mass: Vec<T>) -> LossDistribution<T> {
        assert_eq!(support.len(), mass.len(), "support and mass lengths differ");
        assert!(
            support.windows(2).all(|w| w[0] < w[1]),
            "support must be strictly ascending"
        );
        LossDistribution { support, mass }
    }

    pub fn point_mass(level: u128) -> LossDistribution<T> {
        LossDistribution {
            support: vec![level],
            mass: vec![T::one()],
        }
    }

    pub fn support(&self) -> &[u128] {
        &self.support
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn iter(&self) -> impl Iterator<Item = (u128, &T)> {
        self.support.iter().copied().zip(self.mass.iter())
    }

    pub fn prob_at(&self, level: u128) -> T {
        match self.support.binary_search(&level) {
            Ok(i) => self.mass[i].clone(),
            Err(_) => T::zero(),
        }
    }

    pub fn total_mass(&self) -> T {
        self.mass.iter().cloned().fold(T::zero(), |acc, m| acc + m)
    }

    pub fn mean(&self) -> T {
        self.iter().fold(T::zero(), |acc, (level, m)| {
            acc + from_u128::<T>(level) * m.clone()
        })
    }

    /// Running sums of the mass, aligned with [`support`](Self::support).
    pub fn cdf(&self) -> Vec<T> {
        self.mass
            .iter()
            .scan(T::zero(), |acc, m| {
                *acc = acc.clone() + m.clone();
                Some(acc.clone())
            })
            .collect()
    }

    /// Largest absolute difference in mass over the union of both supports.
    pub fn sup_distance(&self, other: &LossDistribution<T>) -> f64 {
        let mut levels: Vec<u128> = self.support.iter().chain(&other.support).copied().collect();
        levels.sort_unstable();
        levels.dedup();
        levels
            .into_iter()
            .map(|level| {
                let a = self.prob_at(level).to_f64().unwrap_or(f64::NAN);
                let b = other.prob_at(level).to_f64().unwrap_or(f64::NAN);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Drops levels with zero mass.
    pub fn trimmed(self) -> LossDistribution<T> {
        let (support, mass) = self
            .support
            .into_iter()
            .zip(self.mass)
            .filter(|(_, m)| !m.is_zero())
            .unzip();
        LossDistribution { support, mass }
    }
}

/// Exact law by enumerating all 2ⁿ claim outcomes.
pub fn brute_force_pmf<T: Weight>(
    portfolio: &[PolicyRisk],
) -> Result<LossDistribution<T>, RiskModelError> {
    if portfolio.len() > MAX_BRUTE_FORCE_POLICIES {
        return Err(RiskModelError::PortfolioTooLarge(portfolio.len()));
    }
    let probs: Vec<(T, T)> = portfolio
        .iter()
        .map(|p| {
            (
                weight_from_myriad::<T>(p.theta),
                weight_from_myriad::<T>(p.theta.complement()),
            )
        })
        .collect();
    let mut law: BTreeMap<u128, T> = BTreeMap::new();
    for outcome in 0u32..(1u32 << portfolio.len()) {
        let mut level: u128 = 0;
        let mut weight = T::one();
        for (i, (policy, (p, q))) in portfolio.iter().zip(&probs).enumerate() {
            if outcome & (1 << i) != 0 {
                level = level
                    .checked_add(policy.payout.0)
                    .ok_or(crate::fixedpoint::ArithmeticError::Overflow)?;
                weight = weight * p.clone();
            } else {
                weight = weight * q.clone();
            }
        }
        let slot = law.entry(level).or_insert_with(T::zero);
        *slot = slot.clone() + weight;
    }
    let (support, mass) = law.into_iter().unzip();
    Ok(LossDistribution { support, mass })
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact law by the De Pril recursion for the individual risk model.
///
/// Payouts are expressed on the grid of their greatest common divisor. With
/// `vᵢ(x) = P(L = x, policy i claims)`:
///
/// ```text
/// P(L = 0) = Πᵢ (1 − pᵢ)
/// vᵢ(x)    = 0                                          for x < lᵢ
/// vᵢ(x)    = pᵢ/(1 − pᵢ) · [P(L = x − lᵢ) − vᵢ(x − lᵢ)]  otherwise
/// P(L = x) = (1/x) · Σᵢ lᵢ · vᵢ(x)
/// ```
///
/// The last line is `E[L; L = x] = x·P(L = x)`. Policies with identical
/// `(θ, l)` share one `v` column, so homogeneous portfolios cost O(grid).
///
/// The bracket alternates in sign, so a ratio `pᵢ/(1 − pᵢ)` above one
/// amplifies rounding error at every step. Policies with `θ > 1/2` are
/// therefore run through the recursion as their complements `l − l·Jᵢ`,
/// `Jᵢ ~ Bernoulli(1 − θ)`, and the two partial laws convolved.
pub fn de_pril_pmf<T: Weight>(
    portfolio: &[PolicyRisk],
) -> Result<LossDistribution<T>, RiskModelError> {
    for (index, policy) in portfolio.iter().enumerate() {
        if !policy.theta.is_probability() {
            return Err(RiskModelError::DegenerateProbability {
                index,
                theta: policy.theta,
            });
        }
    }
    let active: Vec<&PolicyRisk> = portfolio
        .iter()
        .filter(|p| p.theta.0 > 0 && p.payout.0 > 0)
        .collect();
    if active.is_empty() {
        return Ok(LossDistribution::point_mass(0));
    }

    let unit = active.iter().fold(0u128, |g, p| gcd(g, p.payout.0));
    let mut low: BTreeMap<(Myriad, u128), u128> = BTreeMap::new();
    let mut high: BTreeMap<(Myriad, u128), u128> = BTreeMap::new();
    for p in &active {
        let l = p.payout.0 / unit;
        if p.theta.0 * 2 <= MYRIAD {
            *low.entry((p.theta, l)).or_default() += 1;
        } else {
            *high.entry((p.theta.complement(), l)).or_default() += 1;
        }
    }
    let top_low = grid_top(&low)?;
    let top_high = grid_top(&high)?;
    let top = top_low
        .checked_add(top_high)
        .ok_or(RiskModelError::GridTooLarge(u128::MAX))?;
    if top + 1 > MAX_GRID_POINTS {
        return Err(RiskModelError::GridTooLarge(top + 1));
    }

    let a = recursion::<T>(&low, top_low as usize + 1)?;
    let pmf = if high.is_empty() {
        a
    } else {
        // L = A + C − B with C the sum of the flipped payouts (= top_high).
        let b = recursion::<T>(&high, top_high as usize + 1)?;
        let shift = top_high as usize;
        let mut out = vec![T::zero(); top as usize + 1];
        for (i, ma) in a.iter().enumerate().filter(|(_, m)| !m.is_zero()) {
            for (j, mb) in b.iter().enumerate().filter(|(_, m)| !m.is_zero()) {
                let slot = &mut out[i + shift - j];
                *slot = slot.clone() + ma.clone() * mb.clone();
            }
        }
        out
    };

    let support = (0..=top).map(|k| k * unit).collect();
    Ok(LossDistribution { support, mass: pmf })
}

fn grid_top(groups: &BTreeMap<(Myriad, u128), u128>) -> Result<u128, RiskModelError> {
    groups
        .iter()
        .try_fold(0u128, |acc, ((_, l), count)| {
            l.checked_mul(*count).and_then(|v| acc.checked_add(v))
        })
        .ok_or(RiskModelError::GridTooLarge(u128::MAX))
}

/// The recursion itself on a grid of `len` points; every θ must be below one.
fn recursion<T: Weight>(
    groups: &BTreeMap<(Myriad, u128), u128>,
    len: usize,
) -> Result<Vec<T>, RiskModelError> {
    let p0 = groups.iter().fold(T::one(), |acc, (&(theta, _), &count)| {
        (0..count).fold(acc, |acc, _| {
            acc * weight_from_myriad::<T>(theta.complement())
        })
    });
    if p0.is_zero() {
        return Err(RiskModelError::Underflow);
    }

    struct Column<T> {
        step: usize,
        ratio: T,
        scale: T,
        v: Vec<T>,
    }
    let mut columns: Vec<Column<T>> = groups
        .iter()
        .map(|(&(theta, l), &count)| Column {
            step: l as usize,
            ratio: weight_from_myriad::<T>(theta) / weight_from_myriad::<T>(theta.complement()),
            scale: from_u128::<T>(l * count),
            v: vec![T::zero(); len],
        })
        .collect();

    let mut pmf = vec![T::zero(); len];
    pmf[0] = p0;
    for x in 1..len {
        let mut acc = T::zero();
        for col in columns.iter_mut() {
            if x < col.step {
                continue;
            }
            let prev = x - col.step;
            let v = col.ratio.clone() * (pmf[prev].clone() - col.v[prev].clone());
            acc = acc + col.scale.clone() * v.clone();
            col.v[x] = v;
        }
        pmf[x] = acc / from_u128::<T>(x as u128);
    }
    Ok(pmf)
}

/// `min{x : P(L ≤ x) ≥ α} − premium_offset`, found by bisection on the
/// support index.
pub fn quantile<T: Weight>(
    dist: &LossDistribution<T>,
    alpha: Myriad,
    premium_offset: Wei,
) -> Result<SignedAmount, RiskModelError> {
    if alpha.0 == 0 || alpha.0 >= MYRIAD {
        return Err(RiskModelError::InvalidLevel(alpha));
    }
    let level = weight_from_myriad::<T>(alpha);
    let cdf = dist.cdf();
    if cdf.is_empty() {
        return Ok(SignedAmount::ZERO.checked_sub(premium_offset.to_signed()?)?);
    }
    // Rounding can leave the last cumulative value a hair below 1; the top of
    // the support is the answer then.
    let (mut lo, mut hi) = (0usize, cdf.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if cdf[mid] >= level {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let loss = i128::try_from(dist.support[lo]).map_err(|_| crate::fixedpoint::ArithmeticError::Overflow)?;
    Ok(SignedAmount(loss).checked_sub(premium_offset.to_signed()?)?)
}

/// Exact capital requirement Quantile(L − Π; α) with Π the commercial
/// premiums of the portfolio, computed in the weight type `T`.
pub fn exact_scr_with<T: Weight>(
    portfolio: &[PolicyRisk],
    alpha: Myriad,
) -> Result<SignedAmount, RiskModelError> {
    let premiums = portfolio.iter().try_fold(Wei::ZERO, |acc, p| {
        acc.checked_add(p.premium()?)
    })?;
    let dist = de_pril_pmf::<T>(portfolio)?;
    quantile(&dist, alpha, premiums)
}

/// [`exact_scr_with`] in `f64`.
pub fn exact_scr(portfolio: &[PolicyRisk], alpha: Myriad) -> Result<SignedAmount, RiskModelError> {
    exact_scr_with::<f64>(portfolio, alpha)
}
