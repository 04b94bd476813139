//! Pseudo-random event probabilities and the compensation trigger.
//!
//! A description string is hashed with keccak-256, the digest is read as a
//! big-endian 256-bit integer and reduced modulo 10 000, giving a probability
//! at Myriad scale. A claim is compensated when the observed description maps
//! to a strictly smaller number than the insured one.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha3::{Digest, Keccak256};
use thiserror::Error;

use crate::fixedpoint::{Myriad, MYRIAD, U256};

/// Longest accepted description, in bytes.
pub const MAX_DESCRIPTION_BYTES: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescriptionError {
    #[error("event description is empty")]
    Empty,
    #[error("event description is {0} bytes, limit is {MAX_DESCRIPTION_BYTES}")]
    TooLong(usize),
}

/// Text naming an insured or observed event.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EventDescription(String);

impl EventDescription {
    pub fn new(text: impl Into<String>) -> Result<EventDescription, DescriptionError> {
        let text = text.into();
        if text.is_empty() {
            return Err(DescriptionError::Empty);
        }
        if text.len() > MAX_DESCRIPTION_BYTES {
            return Err(DescriptionError::TooLong(text.len()));
        }
        Ok(EventDescription(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for EventDescription {
    type Error = DescriptionError;

    fn try_from(text: String) -> Result<Self, Self::Error> {
        EventDescription::new(text)
    }
}

impl From<EventDescription> for String {
    fn from(d: EventDescription) -> String {
        d.0
    }
}

impl fmt::Display for EventDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn keccak256(bytes: &[u8]) -> [u8; 32] {
    Keccak256::digest(bytes).into()
}

/// Probability of the described event: keccak-256 of the UTF-8 bytes,
/// modulo 10 000.
pub fn event_probability(description: &EventDescription) -> Myriad {
    let digest = U256::from_be_bytes(keccak256(description.as_str().as_bytes()));
    Myriad((digest % U256::from(MYRIAD)).as_u64())
}

/// Compensation rule: the observed event maps strictly below the insured one.
pub fn is_compensated(insured: &EventDescription, observed: &EventDescription) -> bool {
    event_probability(observed) < event_probability(insured)
}

/// Source of event probabilities for underwriting and settlement.
pub trait ProbabilityOracle {
    fn probability(&self, description: &EventDescription) -> Myriad;

    fn is_compensated(&self, insured: &EventDescription, observed: &EventDescription) -> bool {
        self.probability(observed) < self.probability(insured)
    }
}

/// The hash-based generator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Keccak256Oracle;

impl ProbabilityOracle for Keccak256Oracle {
    fn probability(&self, description: &EventDescription) -> Myriad {
        event_probability(description)
    }
}

/// Oracle configuration carried by scenario scripts and event-log headers.
///
/// `Recorded` pins readings for specific descriptions (for instance values
/// reported by a deployed contract) and hashes everything else.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleConfig {
    #[default]
    Keccak256,
    Recorded { readings: BTreeMap<String, Myriad> },
}

impl OracleConfig {
    pub fn with_reading(self, description: &EventDescription, value: Myriad) -> OracleConfig {
        let mut readings = match self {
            OracleConfig::Keccak256 => BTreeMap::new(),
            OracleConfig::Recorded { readings } => readings,
        };
        readings.insert(description.as_str().to_owned(), value);
        OracleConfig::Recorded { readings }
    }
}

impl ProbabilityOracle for OracleConfig {
    fn probability(&self, description: &EventDescription) -> Myriad {
        match self {
            OracleConfig::Keccak256 => event_probability(description),
            OracleConfig::Recorded { readings } => readings
                .get(description.as_str())
                .copied()
                .unwrap_or_else(|| event_probability(description)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(s: &str) -> EventDescription {
        EventDescription::new(s).unwrap()
    }

    #[test]
    fn empty_input_digest() {
        assert_eq!(
            hex::encode(keccak256(b"")),
            "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
        );
        assert_eq!(
            hex::encode(keccak256(b"abc")),
            "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"
        );
    }

    #[test]
    fn raw_utf8_digest_modulo() {
        // Reference values from an independent keccak implementation.
        assert_eq!(event_probability(&desc("rain")), Myriad(4121));
        assert_eq!(event_probability(&desc("hail")), Myriad(5269));
        assert_eq!(event_probability(&desc("snow")), Myriad(1638));
    }

    #[test]
    fn descriptions_are_validated() {
        assert_eq!(EventDescription::new(""), Err(DescriptionError::Empty));
        assert_eq!(
            EventDescription::new("x".repeat(257)),
            Err(DescriptionError::TooLong(257))
        );
        assert!(EventDescription::new("x".repeat(256)).is_ok());
    }

    #[test]
    fn equal_descriptions_never_compensate() {
        assert!(!is_compensated(&desc("x"), &desc("x")));
        assert!(!Keccak256Oracle.is_compensated(&desc("hail"), &desc("hail")));
    }

    #[test]
    fn recorded_readings_override_hash() {
        let oracle = OracleConfig::Keccak256
            .with_reading(&desc("snow"), Myriad(5328))
            .with_reading(&desc("snow2"), Myriad(2058));
        assert_eq!(oracle.probability(&desc("snow")), Myriad(5328));
        assert!(oracle.is_compensated(&desc("snow"), &desc("snow2")));
        assert_eq!(oracle.probability(&desc("rain")), Myriad(4121));
    }

    #[test]
    fn oracle_config_serde() {
        let oracle = OracleConfig::Keccak256.with_reading(&desc("rain"), Myriad(7164));
        let json = serde_json::to_string(&oracle).unwrap();
        assert_eq!(json, r#"{"kind":"recorded","readings":{"rain":7164}}"#);
        let back: OracleConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, oracle);
    }

    #[test]
    fn probability_is_deterministic_and_in_range() {
        for i in 0..500 {
            let d = desc(&format!("event-{i}"));
            let p = event_probability(&d);
            assert!(p.is_probability());
            assert_eq!(p, event_probability(&d));
        }
    }
}
