//! Scenario scripts.
//!
//! One statement per line; `#` starts a comment outside quotes. Amounts are
//! decimal ETH (at most 18 fractional digits) or decimal tokens, loadings and
//! quantiles decimals with at most 4 fractional digits.
//!
//! ```text
//! cast <name> <address> <initial ETH>      declare a participant
//! probability "<description>" <myriad>      pin an oracle reading (integer, 0..=9999)
//! deploy <actor> [eta1=<d>] [eta2=<d>] [alpha_scr=<d> | q_scr=<d>] [alpha_mcr=<d> | q_mcr=<d>]
//! fund <actor> <ETH>
//! underwrite <actor> "<description>" <payout ETH>
//! burn <actor> <tokens> | max
//! settle <policy id> "<observed description>" [by=<actor>]
//! params [eta1=<d>] [eta2=<d>] [alpha_scr=<d> | q_scr=<d>] [alpha_mcr=<d> | q_mcr=<d>] [by=<actor>]
//! ```
//!
//! `cast` and `probability` lines must precede `deploy`, which must come
//! before every other step. `settle` and `params` are sent by the deployer
//! unless `by=` names someone else; `params` changes only the keys given.
//! Any step may end with `expect: reject`, in which case the step must be
//! rejected for the run to succeed. `alpha_*` values are converted to normal
//! quantiles rounded to four decimals.

use indexmap::IndexMap;
use thiserror::Error;

use crate::fixedpoint::{Myriad, TokenAmount, Wei};
use crate::oracle::{EventDescription, OracleConfig};
use crate::protocol::{Address, Params, PolicyId};
use crate::riskmodel::normal_quantile;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Actor {
    pub name: String,
    pub address: Address,
    pub initial: Wei,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurnAmount {
    Tokens(TokenAmount),
    Max,
}

/// Partial parameter change; unset keys keep their current value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParamUpdate {
    pub eta1: Option<Myriad>,
    pub eta2: Option<Myriad>,
    pub q_scr: Option<Myriad>,
    pub q_mcr: Option<Myriad>,
}

impl ParamUpdate {
    pub fn apply(&self, current: &Params) -> Params {
        Params {
            eta1: self.eta1.unwrap_or(current.eta1),
            eta2: self.eta2.unwrap_or(current.eta2),
            q_scr: self.q_scr.unwrap_or(current.q_scr),
            q_mcr: self.q_mcr.unwrap_or(current.q_mcr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Fund {
        actor: String,
        amount: Wei,
    },
    Underwrite {
        actor: String,
        description: EventDescription,
        payout: Wei,
    },
    Burn {
        actor: String,
        amount: BurnAmount,
    },
    Settle {
        policy: PolicyId,
        observed: EventDescription,
        by: Option<String>,
    },
    UpdateParams {
        update: ParamUpdate,
        by: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub line: usize,
    /// The statement as written, without comment.
    pub text: String,
    pub action: Action,
    pub expect_reject: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Script {
    pub cast: IndexMap<String, Actor>,
    pub oracle: OracleConfig,
    pub deployer: String,
    pub params: Params,
    pub steps: Vec<Step>,
}

impl Script {
    pub fn actor(&self, name: &str) -> &Actor {
        &self.cast[name]
    }
}

/// Splits a line into words; double-quoted words may contain spaces and the
/// escapes `\"` and `\\`. Returns the words and whether each was quoted.
fn tokenize(line: &str) -> Result<Vec<(String, bool)>, String> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.next_if(|c| c.is_whitespace()).is_some() {}
        let Some(&c) = chars.peek() else { break };
        if c == '#' {
            break;
        }
        if c == '"' {
            chars.next();
            let mut word = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some(e @ ('"' | '\\')) => word.push(e),
                        other => return Err(format!("bad escape \\{}", other.map(String::from).unwrap_or_default())),
                    },
                    Some(ch) => word.push(ch),
                    None => return Err("unterminated quote".into()),
                }
            }
            out.push((word, true));
        } else {
            let mut word = String::new();
            while let Some(ch) = chars.next_if(|c| !c.is_whitespace() && *c != '"') {
                word.push(ch);
            }
            out.push((word, false));
        }
    }
    Ok(out)
}

struct Parser {
    cast: IndexMap<String, Actor>,
    oracle: OracleConfig,
    deploy: Option<(String, Params)>,
    steps: Vec<Step>,
}

fn eth(text: &str) -> Result<Wei, String> {
    Wei::from_eth_str(text).map_err(|e| format!("bad ETH amount {text:?}: {e}"))
}

fn decimal(key: &str, text: &str) -> Result<Myriad, String> {
    text.parse::<Myriad>()
        .map_err(|e| format!("bad value for {key}: {text:?}: {e}"))
}

fn quantile_of(key: &str, text: &str) -> Result<Myriad, String> {
    let alpha: f64 = text
        .parse()
        .map_err(|_| format!("bad value for {key}: {text:?}"))?;
    normal_quantile(alpha).ok_or_else(|| format!("{key} must lie strictly between 0.5 and 1, got {text}"))
}

fn description(text: &str) -> Result<EventDescription, String> {
    EventDescription::new(text).map_err(|e| e.to_string())
}

impl Parser {
    fn actor(&self, name: &str) -> Result<String, String> {
        if self.cast.contains_key(name) {
            Ok(name.to_owned())
        } else {
            Err(format!("unknown actor {name:?}; declare it with `cast`"))
        }
    }

    /// Parses `key=value` words into a parameter update and an optional sender.
    fn options(&self, words: &[(String, bool)], allow_by: bool) -> Result<(ParamUpdate, Option<String>), String> {
        let mut update = ParamUpdate::default();
        let mut by = None;
        for (word, _) in words {
            let (key, value) = word
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, found {word:?}"))?;
            let slot = match key {
                "eta1" => (&mut update.eta1, decimal(key, value)?),
                "eta2" => (&mut update.eta2, decimal(key, value)?),
                "q_scr" => (&mut update.q_scr, decimal(key, value)?),
                "q_mcr" => (&mut update.q_mcr, decimal(key, value)?),
                "alpha_scr" => (&mut update.q_scr, quantile_of(key, value)?),
                "alpha_mcr" => (&mut update.q_mcr, quantile_of(key, value)?),
                "by" if allow_by => {
                    by = Some(self.actor(value)?);
                    continue;
                }
                _ => return Err(format!("unknown key {key:?}")),
            };
            if slot.0.replace(slot.1).is_some() {
                return Err(format!("{key} given twice"));
            }
        }
        Ok((update, by))
    }

    fn statement(&mut self, line: usize, text: &str, words: Vec<(String, bool)>) -> Result<(), String> {
        let mut words = words;
        let mut expect_reject = false;
        if words.len() >= 2 && words[words.len() - 2].0 == "expect:" && !words[words.len() - 2].1 {
            let what = words.pop().expect("checked length").0;
            words.pop();
            expect_reject = match what.as_str() {
                "reject" => true,
                "accept" => false,
                other => return Err(format!("expect: takes `reject` or `accept`, found {other:?}")),
            };
        }
        let (verb, quoted) = &words[0];
        if *quoted {
            return Err("a statement must start with a keyword".into());
        }
        let args = &words[1..];
        let arity = |n: usize| -> Result<(), String> {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("`{verb}` takes {n} arguments, found {}", args.len()))
            }
        };

        let header_only = matches!(verb.as_str(), "cast" | "probability" | "deploy");
        if header_only && expect_reject {
            return Err(format!("`{verb}` cannot carry an expectation"));
        }
        if header_only && self.deploy.is_some() {
            return Err(format!("`{verb}` must come before any step after `deploy`"));
        }
        if !header_only && self.deploy.is_none() {
            return Err("the first step must be `deploy`".into());
        }

        let action = match verb.as_str() {
            "cast" => {
                arity(3)?;
                let name = args[0].0.clone();
                if self.cast.contains_key(&name) {
                    return Err(format!("actor {name:?} declared twice"));
                }
                let address: Address = args[1].0.parse().map_err(|e| format!("{e}"))?;
                if self.cast.values().any(|a| a.address == address) {
                    return Err(format!("address {address} declared twice"));
                }
                let initial = eth(&args[2].0)?;
                self.cast.insert(name.clone(), Actor { name, address, initial });
                return Ok(());
            }
            "probability" => {
                arity(2)?;
                let d = description(&args[0].0)?;
                let value: u64 = args[1]
                    .0
                    .parse()
                    .map_err(|_| format!("probability must be an integer Myriad value, found {:?}", args[1].0))?;
                if !Myriad(value).is_probability() {
                    return Err(format!("probability {value} is not below 10000"));
                }
                self.oracle = std::mem::take(&mut self.oracle).with_reading(&d, Myriad(value));
                return Ok(());
            }
            "deploy" => {
                if args.is_empty() {
                    return Err("`deploy` needs the deploying actor".into());
                }
                let owner = self.actor(&args[0].0)?;
                let (update, _) = self.options(&args[1..], false)?;
                self.deploy = Some((owner, update.apply(&Params::default())));
                return Ok(());
            }
            "fund" => {
                arity(2)?;
                Action::Fund {
                    actor: self.actor(&args[0].0)?,
                    amount: eth(&args[1].0)?,
                }
            }
            "underwrite" => {
                arity(3)?;
                Action::Underwrite {
                    actor: self.actor(&args[0].0)?,
                    description: description(&args[1].0)?,
                    payout: eth(&args[2].0)?,
                }
            }
            "burn" => {
                arity(2)?;
                let amount = if args[1].0 == "max" && !args[1].1 {
                    BurnAmount::Max
                } else {
                    BurnAmount::Tokens(
                        TokenAmount::from_tokens_str(&args[1].0)
                            .map_err(|e| format!("bad token amount {:?}: {e}", args[1].0))?,
                    )
                };
                Action::Burn {
                    actor: self.actor(&args[0].0)?,
                    amount,
                }
            }
            "settle" => {
                if args.len() < 2 {
                    return Err("`settle` takes a policy id and an observed description".into());
                }
                let policy: PolicyId = args[0]
                    .0
                    .parse()
                    .map_err(|_| format!("bad policy id {:?}", args[0].0))?;
                let (update, by) = self.options(&args[2..], true)?;
                if update != ParamUpdate::default() {
                    return Err("`settle` accepts only by=".into());
                }
                Action::Settle {
                    policy,
                    observed: description(&args[1].0)?,
                    by,
                }
            }
            "params" => {
                let (update, by) = self.options(args, true)?;
                Action::UpdateParams { update, by }
            }
            other => return Err(format!("unknown statement {other:?}")),
        };
        self.steps.push(Step {
            line,
            text: text.to_owned(),
            action,
            expect_reject,
        });
        Ok(())
    }
}

pub fn parse_script(source: &str) -> Result<Script, ScriptError> {
    let mut parser = Parser {
        cast: IndexMap::new(),
        oracle: OracleConfig::default(),
        deploy: None,
        steps: Vec::new(),
    };
    for (index, raw) in source.lines().enumerate() {
        let line = index + 1;
        let fail = |message: String| ScriptError { line, message };
        let words = tokenize(raw).map_err(fail)?;
        if words.is_empty() {
            continue;
        }
        let text = strip_comment(raw);
        parser.statement(line, text, words).map_err(fail)?;
    }
    let (deployer, params) = parser.deploy.ok_or(ScriptError {
        line: source.lines().count().max(1),
        message: "script has no `deploy` statement".into(),
    })?;
    Ok(Script {
        cast: parser.cast,
        oracle: parser.oracle,
        deployer,
        params,
        steps: parser.steps,
    })
}

fn strip_comment(raw: &str) -> &str {
    let mut in_quote = false;
    let mut escaped = false;
    for (i, c) in raw.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_quote => escaped = true,
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return raw[..i].trim(),
            _ => {}
        }
    }
    raw.trim()
}
