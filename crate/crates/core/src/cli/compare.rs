use serde::Deserialize;

use super::CliError;
use crate::fixedpoint::{Myriad, SignedAmount, Wei};
use crate::riskmodel::{exact_scr, normal_quantile, PolicyRisk, Requirement, SolvencyState};

/// Exact capital against the normal approximation for one portfolio.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub policies: usize,
    pub alpha: f64,
    pub quantile: Myriad,
    pub exact: SignedAmount,
    pub approx: SignedAmount,
    pub abs_gap: u128,
    /// `|approx − exact| / |exact|`; zero when both vanish, `None` when only
    /// the exact value does.
    pub rel_gap: Option<f64>,
}

impl Comparison {
    pub fn report(&self) -> String {
        let rel = self
            .rel_gap
            .map_or("undefined".to_owned(), |g| format!("{:.6}%", 100.0 * g));
        format!(
            "policies      {}\nalpha         {}\nnormal q      {}\nexact_scr     {} ETH\nnormal_scr    {} ETH\nabsolute gap  {} ETH\nrelative gap  {}\n",
            self.policies,
            self.alpha,
            self.quantile.to_decimal_string(),
            self.exact.to_eth_string(),
            self.approx.to_eth_string(),
            Wei(self.abs_gap).to_eth_string(),
            rel
        )
    }
}

/// Compares Quantile(L − Π; α) from the De Pril law with the normal
/// approximation `q_α·σ − Σ ηθl` for the same portfolio.
pub fn compare(portfolio: &[PolicyRisk], alpha: f64) -> Result<Comparison, CliError> {
    let quantile = normal_quantile(alpha)
        .ok_or_else(|| CliError::User(format!("alpha must lie strictly between 0.5 and 1, got {alpha}")))?;
    let level = Myriad::from_f64_rounded(alpha).expect("alpha is in range");
    let exact = exact_scr(portfolio, level).map_err(|e| CliError::User(e.to_string()))?;
    let mut state = SolvencyState::new(quantile, quantile);
    for p in portfolio {
        state = state.add(p).map_err(|e| CliError::User(e.to_string()))?;
    }
    let approx = state.capital(Requirement::Scr);
    let abs_gap = approx.0.abs_diff(exact.0);
    let rel_gap = match (exact.0, abs_gap) {
        (_, 0) => Some(0.0),
        (0, _) => None,
        (e, gap) => Some(gap as f64 / e.unsigned_abs() as f64),
    };
    Ok(Comparison {
        policies: portfolio.len(),
        alpha,
        quantile,
        exact,
        approx,
        abs_gap,
        rel_gap,
    })
}

#[derive(Deserialize)]
struct PortfolioRow {
    theta: String,
    payout: String,
    #[serde(default)]
    eta1: Option<String>,
    #[serde(default)]
    eta2: Option<String>,
}

/// Reads a portfolio CSV with columns `theta,payout[,eta1,eta2]`: θ and the
/// loadings as decimals (at most 4 fractional digits), payout in ETH.
/// Missing loadings are zero.
pub fn parse_portfolio(text: &str) -> Result<Vec<PolicyRisk>, CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<PortfolioRow>().enumerate() {
        let line = i + 2;
        let fail = |what: String| CliError::User(format!("portfolio line {line}: {what}"));
        let row = row.map_err(|e| fail(e.to_string()))?;
        let myriad = |name: &str, text: &str| -> Result<Myriad, CliError> {
            text.parse::<Myriad>().map_err(|e| fail(format!("{name}: {e}")))
        };
        let theta = myriad("theta", &row.theta)?;
        if !theta.is_probability() {
            return Err(fail(format!("theta {} is not below 1", row.theta)));
        }
        let payout = Wei::from_eth_str(&row.payout).map_err(|e| fail(format!("payout: {e}")))?;
        let eta = |name: &str, v: &Option<String>| match v.as_deref() {
            None | Some("") => Ok(Myriad::ZERO),
            Some(t) => myriad(name, t),
        };
        out.push(PolicyRisk::new(
            theta,
            payout,
            eta("eta1", &row.eta1)?,
            eta("eta2", &row.eta2)?,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_fair_coin() {
        let portfolio = parse_portfolio("theta,payout\n0.5,2\n").unwrap();
        let c = compare(&portfolio, 0.995).unwrap();
        assert_eq!(c.exact, SignedAmount(1_000_000_000_000_000_000));
        assert_eq!(c.approx, SignedAmount(2_575_800_000_000_000_000));
        assert!(c.report().contains("exact_scr     1 ETH"));
        assert!(c.report().contains("normal_scr    2.5758 ETH"));
    }

    #[test]
    fn empty_portfolio() {
        let c = compare(&parse_portfolio("theta,payout\n").unwrap(), 0.995).unwrap();
        assert_eq!((c.exact, c.approx, c.rel_gap), (SignedAmount(0), SignedAmount(0), Some(0.0)));
    }

    #[test]
    fn portfolio_errors() {
        assert!(parse_portfolio("theta,payout\n1.2,1\n").is_err());
        assert!(parse_portfolio("theta,payout\n0.3,abc\n").is_err());
        let with_eta = parse_portfolio("theta,payout,eta1,eta2\n0.3,2,0.1,0.05\n").unwrap();
        assert_eq!(with_eta[0].eta2, Myriad(500));
        assert_eq!(compare(&with_eta, 0.4).unwrap_err().exit_code(), 1);
    }
}
