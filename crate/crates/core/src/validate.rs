//! Structural validation of static models.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Guard, SlotRef, StageKind, StageRef, StaticModel, TriggerTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Fatal,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Fatal => "FATAL",
            Severity::Warning => "WARNING",
        })
    }
}

/// Rule identifiers reported by [`validate_static`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rule {
    EmptyMachine,
    DuplicateMachine,
    IllegalIntraArc,
    IllegalInterArc,
    DanglingArc,
    SelfTrigger,
    BadFlag,
    BadStorage,
    UnknownFlag,
    BadFlagValue,
    UnknownChoice,
    BadChoiceOutcome,
    UnknownStorage,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::EmptyMachine => "EMPTY_MACHINE",
            Rule::DuplicateMachine => "DUPLICATE_MACHINE",
            Rule::IllegalIntraArc => "ILLEGAL_INTRA_ARC",
            Rule::IllegalInterArc => "ILLEGAL_INTER_ARC",
            Rule::DanglingArc => "DANGLING_ARC",
            Rule::SelfTrigger => "SELF_TRIGGER",
            Rule::BadFlag => "BAD_FLAG",
            Rule::BadStorage => "BAD_STORAGE",
            Rule::UnknownFlag => "UNKNOWN_FLAG",
            Rule::BadFlagValue => "BAD_FLAG_VALUE",
            Rule::UnknownChoice => "UNKNOWN_CHOICE",
            Rule::BadChoiceOutcome => "BAD_CHOICE_OUTCOME",
            Rule::UnknownStorage => "UNKNOWN_STORAGE",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub rule: Rule,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.severity, self.rule, self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_fatal(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Fatal)
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.findings.iter().filter(|f| f.rule == rule).count()
    }
}

/// Checks every structural invariant of a static model. Findings are sorted,
/// so the report does not depend on declaration order.
pub fn validate_static(model: &StaticModel) -> ValidationReport {
    let mut out = BTreeSet::new();
    let mut push = |rule: Rule, location: String, message: String| {
        out.insert(Finding { severity: Severity::Fatal, rule, location, message });
    };

    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (path, m) in model.machines_with_paths() {
        *seen.entry(m.name.as_str()).or_default() += 1;
        if m.stages.is_empty() && m.submachines.is_empty() {
            push(Rule::EmptyMachine, path.to_string(), "machine has no stages and no submachines".into());
        }
        for flag in m.flags.values() {
            let loc = format!("{path}.{}", flag.name);
            let distinct: BTreeSet<&String> = flag.values.iter().collect();
            if distinct.len() < 2 {
                push(Rule::BadFlag, loc.clone(), "a flag needs at least two distinct values".into());
            }
            if distinct.len() != flag.values.len() {
                push(Rule::BadFlag, loc.clone(), "duplicate flag value".into());
            }
            if !flag.values.contains(&flag.initial) {
                push(Rule::BadFlag, loc, format!("initial value '{}' is not declared", flag.initial));
            }
        }
        if let Some(s) = &m.storage {
            let loc = format!("{path}.{}", s.name);
            if s.capacity == crate::model::Capacity::Bounded(0) {
                push(Rule::BadStorage, loc.clone(), "capacity must be positive".into());
            }
            if !s.capacity.admits(s.level) {
                push(Rule::BadStorage, loc, "level exceeds capacity".into());
            }
        }
    }
    for (name, n) in seen {
        if n > 1 {
            push(Rule::DuplicateMachine, name.to_string(), format!("machine id declared {n} times"));
        }
    }

    for arc in &model.flows {
        let loc = arc.to_string();
        let missing: Vec<&StageRef> = [&arc.from, &arc.to].into_iter().filter(|s| !model.has_stage(s)).collect();
        if !missing.is_empty() {
            for s in missing {
                push(Rule::DanglingArc, loc.clone(), format!("stage {s} is not declared"));
            }
            continue;
        }
        if arc.is_inter_machine() {
            if arc.from.kind != StageKind::Transfer || arc.to.kind != StageKind::Transfer {
                push(
                    Rule::IllegalInterArc,
                    loc,
                    format!(
                        "between machines only transfer -> transfer is allowed, got {} -> {}",
                        arc.from.kind, arc.to.kind
                    ),
                );
            }
        } else if !arc.from.kind.intra_flow_allowed(arc.to.kind) {
            push(Rule::IllegalIntraArc, loc, format!("{} -> {} breaks the stage order", arc.from.kind, arc.to.kind));
        }
    }

    for t in &model.triggers {
        let loc = t.to_string();
        if !model.has_stage(&t.from) {
            push(Rule::DanglingArc, loc.clone(), format!("stage {} is not declared", t.from));
        }
        match &t.to {
            TriggerTarget::Stage { stage } => {
                if !model.has_stage(stage) {
                    push(Rule::DanglingArc, loc.clone(), format!("stage {stage} is not declared"));
                } else if stage == &t.from {
                    push(Rule::SelfTrigger, loc.clone(), "a stage cannot trigger itself".into());
                }
            }
            TriggerTarget::Assign { flag, value } => match model.flag(flag) {
                None => push(Rule::UnknownFlag, loc.clone(), format!("flag {flag} is not declared")),
                Some(f) if !f.values.contains(value) => {
                    push(Rule::BadFlagValue, loc.clone(), format!("'{value}' is not a value of {flag}"))
                }
                Some(_) => {}
            },
        }
        if let Some(g) = &t.guard {
            for atom in g.atoms() {
                check_atom(model, atom, &loc, &mut push);
            }
        }
    }

    ValidationReport { findings: out.into_iter().collect() }
}

fn check_atom(model: &StaticModel, atom: &Guard, loc: &str, push: &mut impl FnMut(Rule, String, String)) {
    match atom {
        Guard::FlagIs(flag, value) => match model.flag(flag) {
            None => push(Rule::UnknownFlag, loc.to_string(), format!("guard reads undeclared flag {flag}")),
            Some(f) if !f.values.contains(value) => {
                push(Rule::BadFlagValue, loc.to_string(), format!("'{value}' is not a value of {flag}"))
            }
            Some(_) => {}
        },
        Guard::ChoiceIs(name, outcome) => match model.choices.get(name) {
            None => push(Rule::UnknownChoice, loc.to_string(), format!("guard reads undeclared choice {name}")),
            Some(c) if !c.outcomes.contains(outcome) => {
                push(Rule::BadChoiceOutcome, loc.to_string(), format!("'{outcome}' is not an outcome of {name}"))
            }
            Some(_) => {}
        },
        Guard::StorageAtLeast(s, _) | Guard::StorageBelow(s, _) => {
            if model.storage(s).is_none() {
                push(Rule::UnknownStorage, loc.to_string(), format!("guard reads undeclared storage {s}"));
            }
        }
        Guard::Not(_) | Guard::And(..) | Guard::Or(..) => {}
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("NOT_FOUND: no stage matches '{0}'")]
    NotFound(String),
    #[error("AMBIGUOUS_PATH: '{path}' matches {} stages", .matches.len())]
    AmbiguousPath { path: String, matches: Vec<StageRef> },
}

impl LookupError {
    pub fn code(&self) -> &'static str {
        match self {
            LookupError::NotFound(_) => "NOT_FOUND",
            LookupError::AmbiguousPath { .. } => "AMBIGUOUS_PATH",
        }
    }
}

/// Resolves a dotted path whose last segment is a stage kind. Leading
/// segments name the machine by any suffix of its qualified path.
pub fn find_stage(model: &StaticModel, path: &str) -> Result<StageRef, LookupError> {
    let segs: Vec<&str> = path.split('.').collect();
    let (kind, machine) = match segs.split_last() {
        Some((k, m)) if !k.is_empty() => (*k, m),
        _ => return Err(LookupError::NotFound(path.to_string())),
    };
    let Some(kind) = StageKind::parse(kind) else {
        return Err(LookupError::NotFound(path.to_string()));
    };
    let matches: Vec<StageRef> = model
        .machines_with_paths()
        .into_iter()
        .filter(|(p, m)| m.stages.contains(&kind) && p.ends_with(machine))
        .map(|(p, _)| StageRef::new(p, kind))
        .collect();
    match matches.len() {
        0 => Err(LookupError::NotFound(path.to_string())),
        1 => Ok(matches.into_iter().next().unwrap()),
        _ => Err(LookupError::AmbiguousPath { path: path.to_string(), matches }),
    }
}

/// Resolves `machine.name` to a flag or storage slot in the same suffix style.
pub fn find_slot(model: &StaticModel, path: &str, want_flag: bool) -> Result<SlotRef, LookupError> {
    let segs: Vec<&str> = path.split('.').collect();
    let Some((name, machine)) = segs.split_last() else {
        return Err(LookupError::NotFound(path.to_string()));
    };
    let matches: Vec<SlotRef> = model
        .machines_with_paths()
        .into_iter()
        .filter(|(p, m)| {
            p.ends_with(machine)
                && if want_flag {
                    m.flags.contains_key(*name)
                } else {
                    m.storage.as_ref().is_some_and(|s| s.name == *name)
                }
        })
        .map(|(p, _)| SlotRef::new(p, *name))
        .collect();
    match matches.len() {
        0 => Err(LookupError::NotFound(path.to_string())),
        1 => Ok(matches.into_iter().next().unwrap()),
        _ => Err(LookupError::AmbiguousPath { path: path.to_string(), matches: Vec::new() }),
    }
}

/// Stages reachable from `start` over flow arcs only, including `start`.
pub fn flow_closure(model: &StaticModel, start: &StageRef) -> BTreeSet<StageRef> {
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(s) = queue.pop_front() {
        for arc in model.flows_from(&s) {
            if seen.insert(arc.to.clone()) {
                queue.push_back(arc.to.clone());
            }
        }
    }
    seen
}
