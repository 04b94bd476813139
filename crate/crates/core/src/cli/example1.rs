use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CliError;
use crate::fixedpoint::{Myriad, SignedAmount, Wei, MYRIAD};
use crate::protocol::Params;
use crate::riskmodel::{PolicyRisk, SolvencyState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example1Action {
    Underwrite,
    Settle,
}

/// Solvency capitals after one policy enters or leaves the portfolio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example1Row {
    pub step: usize,
    pub action: Example1Action,
    pub policy: usize,
    pub theta: Myriad,
    pub payout: Wei,
    pub open: usize,
    pub scr: SignedAmount,
    pub mcr: SignedAmount,
}

/// `n` policies with θ uniform on the Myriad grid `0..=9999` and payout 1 or
/// 5 ETH with equal odds, drawn from ChaCha8 seeded with `seed`. All are
/// underwritten in turn, then settled in the same order.
pub fn example1(n: usize, seed: u64) -> Result<Vec<Example1Row>, CliError> {
    if n == 0 {
        return Err(CliError::User("n must be at least 1".into()));
    }
    let params = Params::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let policies: Vec<PolicyRisk> = (0..n)
        .map(|_| {
            let theta = Myriad(rng.gen_range(0..MYRIAD));
            let eth = if rng.gen_bool(0.5) { 1 } else { 5 };
            let payout = Wei::from_eth(eth).expect("small amounts fit");
            PolicyRisk::new(theta, payout, params.eta1, params.eta2)
        })
        .collect();

    let mut state = SolvencyState::new(params.q_scr, params.q_mcr);
    let mut rows = Vec::with_capacity(2 * n);
    let invariant = |e: crate::riskmodel::RiskModelError| CliError::Invariant(e.to_string());
    for (i, p) in policies.iter().enumerate() {
        state = state.add(p).map_err(invariant)?;
        rows.push(row(rows.len() + 1, Example1Action::Underwrite, i, p, i + 1, &state));
    }
    for (i, p) in policies.iter().enumerate() {
        state = state.remove(p).map_err(invariant)?;
        rows.push(row(rows.len() + 1, Example1Action::Settle, i, p, n - i - 1, &state));
    }
    Ok(rows)
}

fn row(
    step: usize,
    action: Example1Action,
    index: usize,
    p: &PolicyRisk,
    open: usize,
    state: &SolvencyState,
) -> Example1Row {
    Example1Row {
        step,
        action,
        policy: index + 1,
        theta: p.theta,
        payout: p.payout,
        open,
        scr: state.scr(),
        mcr: state.mcr(),
    }
}

/// Columns `step,action,policy,theta,payout,open,SCR,MCR`; θ in Myriad,
/// amounts in wei.
pub fn example1_csv(rows: &[Example1Row]) -> String {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["step", "action", "policy", "theta", "payout", "open", "SCR", "MCR"])
        .expect("in-memory write");
    for r in rows {
        let action = match r.action {
            Example1Action::Underwrite => "underwrite",
            Example1Action::Settle => "settle",
        };
        out.write_record([
            r.step.to_string(),
            action.to_owned(),
            r.policy.to_string(),
            r.theta.to_string(),
            r.payout.to_string(),
            r.open.to_string(),
            r.scr.to_string(),
            r.mcr.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(out.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
