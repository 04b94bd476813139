//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use paramins::cli;
use paramins::ledger::etherscan::{fee_series, parse_txlist};
use paramins::ledger::{replay, EventLog, LogHeader, Recorder, TrajectoryRow};
use paramins::oracle::{keccak256, EventDescription, OracleConfig};
use paramins::protocol::{PolicyStatus, ProtocolError};
use paramins::riskmodel::{brute_force_pmf, de_pril_pmf, PolicyRisk, SolvencyState};
use paramins::{Address, ContractState, Myriad, Params, TokenAmount, Wei};

const ETH: u128 = 1_000_000_000_000_000_000;

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn manifest_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn addr(n: u8) -> Address {
    let mut bytes = [0u8; 20];
    bytes[19] = n;
    Address(bytes)
}

fn desc(s: &str) -> EventDescription {
    EventDescription::new(s).unwrap()
}

// ---------------------------------------------------------------------------
// oracle

const PUBLISHED: [(&str, u64); 9] = [
    ("rain", 7164),
    ("hail", 315),
    ("snow", 5328),
    ("hail1", 4496),
    ("snow2", 2058),
    ("sun", 4188),
    ("sun1", 128),
    ("wind", 4835),
    ("wind9", 1940),
];

fn mod_myriad(digest: [u8; 32]) -> u64 {
    digest.iter().fold(0u64, |acc, b| (acc * 256 + *b as u64) % 10_000)
}

/// `abi.encode(string)`: offset word, length word, right-padded bytes.
fn abi_encode_string(s: &str) -> Vec<u8> {
    let mut out = vec![0u8; 64];
    out[31] = 0x20;
    out[56..64].copy_from_slice(&(s.len() as u64).to_be_bytes());
    out.extend_from_slice(s.as_bytes());
    out.resize(64 + s.len().div_ceil(32) * 32, 0);
    out
}

fn oracle_fidelity() -> Verdict {
    let packed: Vec<u64> = PUBLISHED
        .iter()
        .map(|(s, _)| paramins::oracle::event_probability(&desc(s)).0)
        .collect();
    let encoded: Vec<u64> = PUBLISHED
        .iter()
        .map(|(s, _)| mod_myriad(keccak256(&abi_encode_string(s))))
        .collect();
    let expected: Vec<u64> = PUBLISHED.iter().map(|(_, v)| *v).collect();
    let hits = |got: &[u64]| got.iter().zip(&expected).filter(|(a, b)| a == b).count();
    let show = |got: &[u64]| {
        PUBLISHED
            .iter()
            .zip(got)
            .map(|((s, _), v)| format!("{s}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let ok = packed == expected || encoded == expected;
    verdict(
        ok,
        format!(
            "packed utf-8 {}/9 [{}]; abi.encode {}/9 [{}]",
            hits(&packed),
            show(&packed),
            hits(&encoded),
            show(&encoded)
        ),
    )
}

// ---------------------------------------------------------------------------
// exact backends

fn de_pril_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut worst_sup = 0f64;
    let mut worst_mass = 0f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..=12);
        let portfolio: Vec<PolicyRisk> = (0..n)
            .map(|_| {
                PolicyRisk::new(
                    Myriad(rng.gen_range(101..=9899)),
                    Wei(rng.gen_range(1..=5) * ETH),
                    Myriad(1000),
                    Myriad(500),
                )
            })
            .collect();
        let brute = brute_force_pmf::<f64>(&portfolio).unwrap();
        let recursive = de_pril_pmf::<f64>(&portfolio).unwrap();
        worst_sup = worst_sup.max(recursive.sup_distance(&brute));
        worst_mass = worst_mass.max((recursive.total_mass() - 1.0).abs());
    }
    verdict(
        worst_sup <= 1e-12 && worst_mass <= 1e-12,
        format!("200 portfolios, max sup distance {worst_sup:.3e}, max |mass - 1| {worst_mass:.3e}"),
    )
}

fn normal_approximation_quality() -> Verdict {
    let gap = |n: usize| {
        let portfolio = vec![PolicyRisk::new(Myriad(3000), Wei(2 * ETH), Myriad(1000), Myriad(0)); n];
        let c = cli::compare(&portfolio, 0.995).unwrap();
        (c.rel_gap.unwrap_or(f64::INFINITY), c)
    };
    let (g20, _) = gap(20);
    let (g200, _) = gap(200);
    let (g400, c400) = gap(400);
    verdict(
        g400 < 0.05 && g200 < g20,
        format!(
            "relative gap n=20 {:.4}%, n=200 {:.4}%, n=400 {:.4}% (exact {} ETH, normal {} ETH)",
            100.0 * g20,
            100.0 * g200,
            100.0 * g400,
            c400.exact.to_eth_string(),
            c400.approx.to_eth_string()
        ),
    )
}

fn solvency_reversibility() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let empty = SolvencyState::new(Myriad(25758), Myriad(10364));
    let mut state = empty;
    let mut live: Vec<PolicyRisk> = Vec::new();
    let (mut adds, mut removes, mut mismatches) = (0, 0, 0);
    for op in 0..10_000 {
        if live.is_empty() || rng.gen_bool(0.55) {
            let risk = PolicyRisk::new(
                Myriad(rng.gen_range(0..10_000)),
                Wei(rng.gen_range(1..=10_000u128) * 1_000_000_000_000_000),
                Myriad(rng.gen_range(0..3000)),
                Myriad(rng.gen_range(0..3000)),
            );
            state = state.add(&risk).unwrap();
            live.push(risk);
            adds += 1;
        } else {
            let risk = live.swap_remove(rng.gen_range(0..live.len()));
            state = state.remove(&risk).unwrap();
            removes += 1;
        }
        if op % 500 == 499 {
            let rebuilt = live.iter().fold(empty, |s, r| s.add(r).unwrap());
            mismatches += usize::from(rebuilt != state);
        }
    }
    let rebuilt = live.iter().fold(empty, |s, r| s.add(r).unwrap());
    mismatches += usize::from(rebuilt != state);
    verdict(
        mismatches == 0,
        format!("{adds} adds, {removes} removes, {} survivors, {mismatches} mismatching checkpoints", live.len()),
    )
}

// ---------------------------------------------------------------------------
// scenario

fn scenario_replay() -> Verdict {
    let script = manifest_path("scenarios/weather_scenario.txt");
    let dir = tempfile::tempdir().unwrap();
    let first = match cli::run_scenario(&script, &dir.path().join("a")) {
        Ok(run) => run,
        Err(e) => return verdict(false, format!("scenario did not run: {e}")),
    };
    cli::run_scenario(&script, &dir.path().join("b")).unwrap();
    let read = |sub: &str| std::fs::read(dir.path().join(sub).join("events.jsonl")).unwrap();
    let reproducible = read("a") == read("b");

    let state = first.recorder.state();
    let events = first.recorder.log().len() as u64;
    let last = events.saturating_sub(1);
    let liquidated_at: Vec<u64> = first.recorder.liquidations().iter().map(|(o, _)| *o).collect();
    let at_last = liquidated_at == [last];
    let reset = state.balance.is_zero()
        && state.surplus.is_zero()
        && state.total_supply.is_zero()
        && state.tokens_for(Wei(ETH)).ok() == Some(TokenAmount(ETH));
    let canceled = state.policy(1).map(|p| p.status) == Some(PolicyStatus::Canceled);
    let expected_refund = (10_000u128 + 1000) * 7164 * (6 * ETH / 100) / 100_000_000;
    let refund = first
        .recorder
        .liquidations()
        .iter()
        .flat_map(|(_, r)| &r.refunds)
        .find(|r| r.policy_id == 1)
        .map(|r| r.paid);
    let ok = at_last && reset && canceled && refund == Some(Wei(expected_refund)) && reproducible;
    verdict(
        ok,
        format!(
            "{events} events; liquidation at {liquidated_at:?} (want [{last}]); end B={} X={} Y={}; policy #1 {:?}; refund {} (want {expected_refund}); log reproducible: {reproducible}",
            state.balance.0,
            state.surplus.0,
            state.total_supply.0,
            state.policy(1).map(|p| p.status),
            refund.map_or("none".to_owned(), |w| w.0.to_string()),
        ),
    )
}

// ---------------------------------------------------------------------------
// random operations

const OWNER: u8 = 1;
const ACTORS: u8 = 6;

#[derive(Debug, Clone)]
enum Op {
    Fund(Address, Wei),
    Underwrite(Address, EventDescription, Wei),
    Burn(Address, TokenAmount),
    BurnMax(Address),
    Settle(Address, u64, EventDescription),
    Params(Address, Params),
}

fn amount(rng: &mut ChaCha8Rng) -> Wei {
    Wei(match rng.gen_range(0..12) {
        0 => 0,
        1 => rng.gen_range(1..10_000),
        _ => rng.gen_range(1..=300u128) * (ETH / 100),
    })
}

fn description(rng: &mut ChaCha8Rng) -> EventDescription {
    desc(&format!("event-{}", rng.gen_range(0..48)))
}

fn actor(rng: &mut ChaCha8Rng) -> Address {
    addr(rng.gen_range(1..=ACTORS))
}

fn random_op(rng: &mut ChaCha8Rng, s: &ContractState) -> Op {
    match rng.gen_range(0..20) {
        0..=5 => Op::Fund(actor(rng), amount(rng)),
        6..=10 => Op::Underwrite(actor(rng), description(rng), amount(rng)),
        11..=12 => {
            let who = actor(rng);
            let held = s.tokens_of(&who).0;
            let y = match rng.gen_range(0..5) {
                0 => held + rng.gen_range(1..ETH),
                1 => 0,
                _ => held * rng.gen_range(1..=100) / 100,
            };
            Op::Burn(who, TokenAmount(y))
        }
        13 => Op::BurnMax(actor(rng)),
        14..=17 => {
            let caller = if rng.gen_bool(0.9) { addr(OWNER) } else { actor(rng) };
            let id = rng.gen_range(0..=s.policies_ever() as u64 + 1);
            Op::Settle(caller, id, description(rng))
        }
        _ => {
            let caller = if rng.gen_bool(0.8) { addr(OWNER) } else { actor(rng) };
            let params = Params {
                eta1: Myriad(rng.gen_range(0..3000)),
                eta2: Myriad(rng.gen_range(0..3000)),
                q_scr: Myriad(rng.gen_range(5000..40_000)),
                q_mcr: Myriad(rng.gen_range(2000..30_000)),
            };
            Op::Params(caller, params)
        }
    }
}

fn apply(s: &mut ContractState, op: &Op) -> Result<(), ProtocolError> {
    let oracle = OracleConfig::Keccak256;
    match op {
        Op::Fund(a, x) => s.fund(*a, *x).map(drop),
        Op::Underwrite(a, d, l) => s.underwrite(*a, d.clone(), *l, &oracle).map(drop),
        Op::Burn(a, y) => s.burn(*a, *y).map(drop),
        Op::BurnMax(a) => {
            let y = s.max_burnable(a);
            s.burn(*a, y).map(drop)
        }
        Op::Settle(c, id, obs) => s.settle(*c, *id, obs, &oracle).map(drop),
        Op::Params(c, p) => s.update_params(*c, *p).map(drop),
    }
}

fn apply_recorded(r: &mut Recorder, op: &Op) -> Result<(), ProtocolError> {
    match op {
        Op::Fund(a, x) => r.fund(*a, *x).map(drop),
        Op::Underwrite(a, d, l) => r.underwrite(*a, d.clone(), *l).map(drop),
        Op::Burn(a, y) => r.burn(*a, *y).map(drop),
        Op::BurnMax(a) => {
            let y = r.state().max_burnable(a);
            r.burn(*a, y).map(drop)
        }
        Op::Settle(c, id, obs) => r.settle(*c, *id, obs).map(drop),
        Op::Params(c, p) => r.update_params(*c, *p),
    }
}

fn stated_invariants(s: &ContractState) -> Result<(), String> {
    if s.balance < s.surplus {
        return Err(format!("B {} < X {}", s.balance.0, s.surplus.0));
    }
    let held: u128 = s.tokens.values().map(|t| t.0).sum();
    if held != s.total_supply.0 {
        return Err(format!("sum of balances {held} != supply {}", s.total_supply.0));
    }
    let open: u128 = s.open_policies().map(|p| p.premium.0).sum();
    if s.balance.0 - s.surplus.0 != open {
        return Err(format!("B - X = {} != open premiums {open}", s.balance.0 - s.surplus.0));
    }
    s.check_invariants()
}

fn invariant_fuzzing() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut accepted, mut rejected, mut liquidations, mut hard) = (0u64, 0u64, 0u64, 0u64);
    let mut failures: Vec<String> = Vec::new();
    for _episode in 0..100 {
        let mut s = ContractState::deploy(addr(OWNER), Params::default());
        for _ in 0..1000 {
            let op = random_op(&mut rng, &s);
            let before = s.clone();
            match apply(&mut s, &op) {
                Ok(()) => {
                    accepted += 1;
                    if before.balance > Wei::ZERO && s.balance.is_zero() && matches!(op, Op::Settle(..)) {
                        liquidations += 1;
                    }
                    if let Err(e) = stated_invariants(&s) {
                        failures.push(format!("after {op:?}: {e}"));
                    }
                }
                Err(e) => {
                    rejected += 1;
                    hard += u64::from(e.is_invariant_violation());
                    if s != before {
                        failures.push(format!("rejected {op:?} ({e}) changed the state"));
                    }
                }
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{} ops: {accepted} accepted, {rejected} rejected ({hard} payout-exceeds-balance), ~{liquidations} liquidations, {} failures{}",
            accepted + rejected,
            failures.len(),
            failures.first().map_or(String::new(), |f| format!("; first: {f}"))
        ),
    )
}

fn fund_burn_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    let funder = addr(ACTORS + 1);
    let (mut pairs, mut gated, mut violations) = (0, 0, Vec::new());
    let mut max_loss = 0u128;
    while pairs < 1000 {
        let mut s = ContractState::deploy(addr(OWNER), Params::default());
        for _ in 0..rng.gen_range(0..40) {
            let op = random_op(&mut rng, &s);
            let _ = apply(&mut s, &op);
        }
        let x = match rng.gen_range(0..3) {
            0 => rng.gen_range(1..1_000_000u128),
            _ => rng.gen_range(1..=5 * ETH),
        };
        let (surplus, supply) = (s.surplus.0, s.total_supply.0);
        let Ok((minted, _)) = s.fund(funder, Wei(x)) else {
            continue;
        };
        let Ok((back, _)) = s.burn(funder, minted) else {
            gated += 1;
            continue;
        };
        pairs += 1;
        max_loss = max_loss.max(x.saturating_sub(back.0));
        if back.0 > x || x - back.0 > 2 {
            violations.push(format!("x={x} x'={} with X={surplus} Y={supply}", back.0));
        }
    }
    verdict(
        violations.is_empty(),
        format!(
            "{pairs} pairs ({gated} burns blocked by the gate, redrawn), max x - x' = {max_loss} wei, {} outside [x-2, x]{}",
            violations.len(),
            violations.first().map_or(String::new(), |v| format!("; first: {v}"))
        ),
    )
}

// ---------------------------------------------------------------------------
// ledger

fn same_trajectory(a: &[TrajectoryRow], b: &[TrajectoryRow]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            (x.ordinal, x.balance, x.surplus, x.scr, x.mcr) == (y.ordinal, y.balance, y.surplus, y.scr, y.mcr)
        })
}

fn ledger_integrity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let (mut logs, mut events, mut settlements, mut faults) = (0, 0, 0, Vec::new());
    for _ in 0..60 {
        let mut r = Recorder::deploy(LogHeader {
            owner: addr(OWNER),
            params: Params::default(),
            oracle: OracleConfig::Keccak256,
        });
        for _ in 0..300 {
            let op = random_op(&mut rng, r.state());
            let _ = apply_recorded(&mut r, &op);
        }
        logs += 1;
        events += r.log().len();
        settlements += r
            .log()
            .records()
            .iter()
            .filter(|e| matches!(e.event, paramins::ledger::Event::ClaimSettled { .. }))
            .count();
        let parsed = EventLog::parse(&r.log().to_jsonl()).unwrap();
        match replay(&parsed) {
            Ok(replayed) if same_trajectory(&replayed.rows, r.rows()) => {}
            Ok(_) => faults.push("trajectory differs".to_owned()),
            Err(e) => faults.push(e.to_string()),
        }
    }

    let body = std::fs::read_to_string(manifest_path("fixtures/txlist_sepolia.json")).unwrap();
    let records = parse_txlist(&body).unwrap();
    let fees = fee_series(&records).unwrap();
    let products_match = records
        .iter()
        .zip(&fees)
        .all(|(r, (_, fee))| r.gas_price.checked_mul(r.gas_used as u128) == Some(fee.0));
    let creation_fee = records
        .iter()
        .zip(&fees)
        .find(|(r, _)| r.is_creation())
        .map(|(_, (_, f))| *f);
    let largest = fees.iter().map(|(_, f)| *f).max();
    let creation_largest = creation_fee.is_some() && creation_fee == largest;
    verdict(
        faults.is_empty() && products_match && creation_largest && fees.len() == records.len(),
        format!(
            "{logs} logs, {events} events, {settlements} settlements replayed, {} faults{}; fixture {} txs, fee = gasPrice*gasUsed: {products_match}, creation fee {} ETH largest: {creation_largest}",
            faults.len(),
            faults.first().map_or(String::new(), |f| format!(" (first: {f})")),
            records.len(),
            creation_fee.map_or("none".to_owned(), |f| f.to_eth_string()),
        ),
    )
}

// ---------------------------------------------------------------------------

type Criterion = (&'static str, Duration, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("oracle fidelity", Duration::from_secs(1), oracle_fidelity),
        ("exact backend equivalence", Duration::from_secs(30), de_pril_equivalence),
        ("normal approximation quality", Duration::from_secs(60), normal_approximation_quality),
        ("solvency state reversibility", Duration::MAX, solvency_reversibility),
        ("scenario replay", Duration::from_secs(5), scenario_replay),
        ("invariant fuzzing", Duration::from_secs(120), invariant_fuzzing),
        ("fund/burn round trip", Duration::MAX, fund_burn_round_trip),
        ("ledger integrity", Duration::MAX, ledger_integrity),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let ok = v.ok && in_time;
        failed += usize::from(!ok);
        let budget_note = if budget == Duration::MAX {
            String::new()
        } else {
            format!(" / {}s", budget.as_secs())
        };
        println!(
            "{} {name} ({:.2}s{budget_note}): {}{}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            v.detail,
            if in_time { "" } else { " [over time budget]" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
