//! Canonical text rendering of a [`ContractState`].
//!
//! One item per line, fields in this fixed order, every amount a decimal
//! integer at its native scale (wei, token base units, Myriad):
//!
//! ```text
//! owner <address>
//! balance <wei>
//! surplus <wei>
//! total_supply <tokens>
//! clock <n>
//! params eta1=<m> eta2=<m> q_scr=<m> q_mcr=<m>
//! solvency sum_var=<wei²> sum_loaded_mean=<wei> q_scr=<m> q_mcr=<m>
//! holders <count>
//! holder <address> <tokens>                  (first-seen order)
//! policies <count>
//! policy <id> status=<0..3> holder=<address> theta=<m> payout=<wei> eta1=<m> eta2=<m> premium=<wei> variance=<wei²> loaded_mean=<wei> underwritten_at=<n> description=<JSON string>
//! ```

use std::fmt::Write;

use super::ContractState;

impl ContractState {
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        let p = &self.params;
        let s = &self.solvency;
        // Writing to a String cannot fail.
        let _ = writeln!(out, "owner {}", self.owner);
        let _ = writeln!(out, "balance {}", self.balance);
        let _ = writeln!(out, "surplus {}", self.surplus);
        let _ = writeln!(out, "total_supply {}", self.total_supply);
        let _ = writeln!(out, "clock {}", self.clock);
        let _ = writeln!(
            out,
            "params eta1={} eta2={} q_scr={} q_mcr={}",
            p.eta1, p.eta2, p.q_scr, p.q_mcr
        );
        let _ = writeln!(
            out,
            "solvency sum_var={} sum_loaded_mean={} q_scr={} q_mcr={}",
            s.sum_var, s.sum_loaded_mean, s.q_scr, s.q_mcr
        );
        let _ = writeln!(out, "holders {}", self.tokens.len());
        for (holder, tokens) in &self.tokens {
            let _ = writeln!(out, "holder {holder} {tokens}");
        }
        let _ = writeln!(out, "policies {}", self.policies.len());
        for policy in &self.policies {
            let r = &policy.risk;
            let description = serde_json::to_string(policy.description.as_str())
                .expect("strings always serialize");
            let _ = writeln!(
                out,
                "policy {} status={} holder={} theta={} payout={} eta1={} eta2={} premium={} variance={} loaded_mean={} underwritten_at={} description={}",
                policy.id,
                policy.status as u8,
                policy.holder,
                r.theta,
                r.payout,
                r.eta1,
                r.eta2,
                policy.premium,
                policy.contribution.variance,
                policy.contribution.loaded_mean,
                policy.underwritten_at,
                description,
            );
        }
        out
    }
}
