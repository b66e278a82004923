//! Deterministic discrete-event execution and trace conformance.

mod check;
mod engine;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ChoicePoint;

pub use check::{check_trace, TraceViolation, Verdict, ViolationKind};
pub use engine::{simulate, Simulator};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("CASCADE_OVERFLOW: more than {limit} activations in one cascade at tick {tick}")]
    CascadeOverflow { tick: u64, limit: usize },
    #[error("STIMULUS_TARGET_INVALID: {0}")]
    StimulusTargetInvalid(String),
    #[error("UNKNOWN_CHOICE_POINT: {0}")]
    UnknownChoicePoint(String),
    #[error("UNKNOWN_OUTCOME: '{outcome}' is not an outcome of {point}")]
    UnknownOutcome { point: String, outcome: String },
    #[error("INVALID_MODEL: {0}")]
    InvalidModel(String),
    #[error("BAD_CONFIG: {0}")]
    BadConfig(String),
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::CascadeOverflow { .. } => "CASCADE_OVERFLOW",
            SimError::StimulusTargetInvalid(_) => "STIMULUS_TARGET_INVALID",
            SimError::UnknownChoicePoint(_) => "UNKNOWN_CHOICE_POINT",
            SimError::UnknownOutcome { .. } => "UNKNOWN_OUTCOME",
            SimError::InvalidModel(_) => "INVALID_MODEL",
            SimError::BadConfig(_) => "BAD_CONFIG",
        }
    }
}

/// A thing handed to the model from outside.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thing {
    pub id: String,
    #[serde(default)]
    pub payload: BTreeMap<String, String>,
}

/// One entry of a stimuli file: `{"at": 0, "target": "Money.transfer", "payload": {}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub at: u64,
    pub target: String,
    #[serde(default)]
    pub payload: BTreeMap<String, String>,
}

impl Stimulus {
    pub fn new(at: u64, target: &str) -> Self {
        Stimulus { at, target: target.to_string(), payload: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: &str) -> Self {
        self.payload.insert(key.to_string(), value.to_string());
        self
    }
}

/// What an occurrence follows from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cause {
    Stimulus(usize),
    Occurrence(usize),
    Init,
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cause::Stimulus(i) => write!(f, "stimulus:{i}"),
            Cause::Occurrence(i) => write!(f, "occurrence:{i}"),
            Cause::Init => f.write_str("init"),
        }
    }
}

impl Cause {
    pub fn parse(s: &str) -> Option<Cause> {
        if s == "init" {
            return Some(Cause::Init);
        }
        let (kind, n) = s.split_once(':')?;
        let n: usize = n.parse().ok()?;
        match kind {
            "stimulus" => Some(Cause::Stimulus(n)),
            "occurrence" => Some(Cause::Occurrence(n)),
            _ => None,
        }
    }
}

/// One timestamped activation of an event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub event: String,
    pub at: u64,
    pub cause: String,
    /// Railcar traces name the car and area involved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub car: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<String>,
}

impl Occurrence {
    pub fn new(event: &str, at: u64, cause: Cause) -> Self {
        Occurrence { event: event.to_string(), at, cause: cause.to_string(), car: None, area: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub seed: u64,
    pub occurrences: Vec<Occurrence>,
    pub flags: BTreeMap<String, String>,
}

impl Trace {
    /// Stable pretty JSON with keys in declaration order and a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Trace, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn events(&self) -> Vec<&str> {
        self.occurrences.iter().map(|o| o.event.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChoicePolicy {
    /// First declared outcome.
    #[default]
    ByPriority,
    SeededRandom,
}

/// Scripted outcomes per choice point, consumed in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChoiceScript {
    entries: BTreeMap<String, VecDeque<String>>,
}

impl ChoiceScript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers outcomes for `point`, checked against the declared choice points.
    pub fn script_choice(
        &mut self,
        known: &BTreeMap<String, ChoicePoint>,
        point: &str,
        outcomes: &[&str],
    ) -> Result<&mut Self, SimError> {
        let cp = known.get(point).ok_or_else(|| SimError::UnknownChoicePoint(point.to_string()))?;
        for o in outcomes {
            if !cp.outcomes.iter().any(|x| x == o) {
                return Err(SimError::UnknownOutcome { point: point.to_string(), outcome: o.to_string() });
            }
        }
        self.entries.entry(point.to_string()).or_default().extend(outcomes.iter().map(|o| o.to_string()));
        Ok(self)
    }

    /// Parses `point=a,b,c` as given on the command line.
    pub fn parse_entry(&mut self, known: &BTreeMap<String, ChoicePoint>, text: &str) -> Result<(), SimError> {
        let (point, outs) = text
            .split_once('=')
            .ok_or_else(|| SimError::BadConfig(format!("script entry '{text}' is not point=outcomes")))?;
        let outs: Vec<&str> = outs.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        self.script_choice(known, point.trim(), &outs).map(|_| ())
    }

    pub fn next(&mut self, point: &str) -> Option<String> {
        self.entries.get_mut(point)?.pop_front()
    }

    pub fn points(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Resolves choice points from a script, falling back to a policy.
#[derive(Debug)]
pub struct Chooser {
    script: ChoiceScript,
    policy: ChoicePolicy,
    rng: rand_chacha::ChaCha8Rng,
}

impl Chooser {
    pub fn new(script: ChoiceScript, policy: ChoicePolicy, seed: u64) -> Self {
        use rand::SeedableRng;
        Chooser { script, policy, rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn choose(&mut self, point: &str, outcomes: &[String]) -> String {
        use rand::Rng;
        if let Some(o) = self.script.next(point) {
            return o;
        }
        match self.policy {
            ChoicePolicy::ByPriority => outcomes[0].clone(),
            ChoicePolicy::SeededRandom => outcomes[self.rng.gen_range(0..outcomes.len())].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    pub max_ticks: u64,
    pub cascade_limit: usize,
    pub policy: ChoicePolicy,
    pub script: ChoiceScript,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            max_ticks: 1_000,
            cascade_limit: 1_000,
            policy: ChoicePolicy::ByPriority,
            script: ChoiceScript::new(),
        }
    }
}

impl SimConfig {
    pub fn seeded(seed: u64) -> Self {
        SimConfig { seed, ..Default::default() }
    }

    pub fn check(&self) -> Result<(), SimError> {
        if self.max_ticks == 0 {
            return Err(SimError::BadConfig("max ticks must be positive".into()));
        }
        if self.cascade_limit == 0 {
            return Err(SimError::BadConfig("cascade limit must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points() -> BTreeMap<String, ChoicePoint> {
        BTreeMap::from([(
            "verify".to_string(),
            ChoicePoint { name: "verify".into(), outcomes: vec!["pass".into(), "fail".into()] },
        )])
    }

    #[test]
    fn scripted_outcomes_are_consumed_in_order() {
        let mut s = ChoiceScript::new();
        s.script_choice(&points(), "verify", &["pass", "fail", "pass"]).unwrap();
        let mut c = Chooser::new(s, ChoicePolicy::ByPriority, 0);
        let outs = vec!["pass".to_string(), "fail".to_string()];
        let got: Vec<String> = (0..4).map(|_| c.choose("verify", &outs)).collect();
        assert_eq!(got, ["pass", "fail", "pass", "pass"]);
    }

    #[test]
    fn unknown_point_is_rejected() {
        let mut s = ChoiceScript::new();
        let e = s.script_choice(&points(), "nope", &["pass"]).unwrap_err();
        assert_eq!(e.code(), "UNKNOWN_CHOICE_POINT");
        let e = s.script_choice(&points(), "verify", &["maybe"]).unwrap_err();
        assert_eq!(e.code(), "UNKNOWN_OUTCOME");
    }

    #[test]
    fn cause_round_trips() {
        for c in [Cause::Init, Cause::Stimulus(3), Cause::Occurrence(12)] {
            assert_eq!(Cause::parse(&c.to_string()), Some(c));
        }
        assert_eq!(Cause::parse("occurrence:x"), None);
    }
}
