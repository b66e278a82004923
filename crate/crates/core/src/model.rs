//! Static thinging-machine models: machines, stages, flow and trigger arcs.
//!
//! A [`StaticModel`] holds no time values. All collections are ordered maps or
//! sets so that two models with the same content compare equal regardless of
//! the order in which they were declared.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::Serialize;

/// The five generic actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Create,
    Process,
    Release,
    Transfer,
    Receive,
}

impl StageKind {
    pub const ALL: [StageKind; 5] =
        [StageKind::Create, StageKind::Process, StageKind::Release, StageKind::Transfer, StageKind::Receive];

    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::Create => "create",
            StageKind::Process => "process",
            StageKind::Release => "release",
            StageKind::Transfer => "transfer",
            StageKind::Receive => "receive",
        }
    }

    pub fn parse(s: &str) -> Option<StageKind> {
        StageKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Whether `self -> to` is a legal flow inside one machine.
    pub fn intra_flow_allowed(self, to: StageKind) -> bool {
        use StageKind::*;
        matches!(
            (self, to),
            (Transfer, Receive)
                | (Receive, Process)
                | (Receive, Release)
                | (Create, Process)
                | (Create, Release)
                | (Process, Release)
                | (Release, Transfer)
        )
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fully qualified machine name, root first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "String")]
pub struct MachinePath(pub Vec<String>);

impl std::str::FromStr for MachinePath {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(MachinePath::new(s.split('.')))
    }
}

impl MachinePath {
    pub fn new<I, S>(segments: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MachinePath(segments.into_iter().map(Into::into).collect())
    }

    pub fn name(&self) -> &str {
        self.0.last().map(String::as_str).unwrap_or("")
    }

    pub fn child(&self, name: &str) -> MachinePath {
        let mut v = self.0.clone();
        v.push(name.to_string());
        MachinePath(v)
    }

    pub fn parent(&self) -> Option<MachinePath> {
        (self.0.len() > 1).then(|| MachinePath(self.0[..self.0.len() - 1].to_vec()))
    }

    /// True when `suffix` names this machine by a trailing run of segments.
    pub fn ends_with(&self, suffix: &[&str]) -> bool {
        suffix.len() <= self.0.len() && self.0[self.0.len() - suffix.len()..].iter().zip(suffix).all(|(a, b)| a == b)
    }
}

impl fmt::Display for MachinePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("."))
    }
}

impl From<MachinePath> for String {
    fn from(p: MachinePath) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "String")]
pub struct StageRef {
    pub machine: MachinePath,
    pub kind: StageKind,
}

impl StageRef {
    pub fn new(machine: MachinePath, kind: StageKind) -> Self {
        StageRef { machine, kind }
    }
}

impl fmt::Display for StageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.machine, self.kind)
    }
}

impl From<StageRef> for String {
    fn from(s: StageRef) -> String {
        s.to_string()
    }
}

/// A flag or a storage, addressed as `machine.name`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "String")]
pub struct SlotRef {
    pub machine: MachinePath,
    pub name: String,
}

impl SlotRef {
    pub fn new(machine: MachinePath, name: impl Into<String>) -> Self {
        SlotRef { machine, name: name.into() }
    }
}

impl fmt::Display for SlotRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.machine, self.name)
    }
}

impl From<SlotRef> for String {
    fn from(s: SlotRef) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Flag {
    pub name: String,
    pub values: Vec<String>,
    pub initial: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Capacity {
    Bounded(u64),
    Unbounded,
}

impl Capacity {
    pub fn admits(self, level: u64) -> bool {
        match self {
            Capacity::Bounded(cap) => level <= cap,
            Capacity::Unbounded => true,
        }
    }
}

/// Counted buffer of things.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Storage {
    pub name: String,
    pub capacity: Capacity,
    pub level: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Machine {
    pub name: String,
    pub stages: BTreeSet<StageKind>,
    pub flags: BTreeMap<String, Flag>,
    pub storage: Option<Storage>,
    pub submachines: BTreeMap<String, Machine>,
}

impl Machine {
    pub fn new(name: impl Into<String>) -> Self {
        Machine {
            name: name.into(),
            stages: BTreeSet::new(),
            flags: BTreeMap::new(),
            storage: None,
            submachines: BTreeMap::new(),
        }
    }

    pub fn with_stages(mut self, kinds: &[StageKind]) -> Self {
        self.stages.extend(kinds.iter().copied());
        self
    }

    pub fn with_flag(mut self, name: &str, values: &[&str], initial: &str) -> Self {
        self.flags.insert(
            name.to_string(),
            Flag {
                name: name.to_string(),
                values: values.iter().map(|v| v.to_string()).collect(),
                initial: initial.to_string(),
            },
        );
        self
    }

    pub fn with_storage(mut self, name: &str, capacity: Capacity, level: u64) -> Self {
        self.storage = Some(Storage { name: name.to_string(), capacity, level });
        self
    }

    pub fn with_submachine(mut self, m: Machine) -> Self {
        self.submachines.insert(m.name.clone(), m);
        self
    }
}

/// Solid arrow: a thing moves from one stage to another.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FlowArc {
    pub from: StageRef,
    pub to: StageRef,
}

impl FlowArc {
    pub fn new(from: StageRef, to: StageRef) -> Self {
        FlowArc { from, to }
    }

    pub fn is_inter_machine(&self) -> bool {
        self.from.machine != self.to.machine
    }
}

impl fmt::Display for FlowArc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TriggerTarget {
    Stage { stage: StageRef },
    Assign { flag: SlotRef, value: String },
}

impl fmt::Display for TriggerTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TriggerTarget::Stage { stage } => write!(f, "{stage}"),
            TriggerTarget::Assign { flag, value } => write!(f, "{flag} = {value}"),
        }
    }
}

/// Boolean condition over flags, choice points and storage levels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Guard {
    FlagIs(SlotRef, String),
    ChoiceIs(String, String),
    StorageAtLeast(SlotRef, u64),
    StorageBelow(SlotRef, u64),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn and(self, other: Guard) -> Guard {
        Guard::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Guard) -> Guard {
        Guard::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Guard {
        Guard::Not(Box::new(self))
    }

    /// Visits every atom in evaluation order.
    pub fn atoms(&self) -> Vec<&Guard> {
        let mut out = Vec::new();
        fn walk<'a>(g: &'a Guard, out: &mut Vec<&'a Guard>) {
            match g {
                Guard::Not(a) => walk(a, out),
                Guard::And(a, b) | Guard::Or(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                atom => out.push(atom),
            }
        }
        walk(self, &mut out);
        out
    }
}

/// Dashed arrow: activation of one stage causes another stage to activate or a
/// flag to change.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TriggerArc {
    pub from: StageRef,
    pub to: TriggerTarget,
    pub guard: Option<Guard>,
}

impl TriggerArc {
    pub fn new(from: StageRef, to: TriggerTarget) -> Self {
        TriggerArc { from, to, guard: None }
    }

    pub fn to_stage(from: StageRef, to: StageRef) -> Self {
        TriggerArc::new(from, TriggerTarget::Stage { stage: to })
    }

    pub fn assign(from: StageRef, flag: SlotRef, value: &str) -> Self {
        TriggerArc::new(from, TriggerTarget::Assign { flag, value: value.to_string() })
    }

    pub fn when(mut self, guard: Guard) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn key(&self) -> TriggerKey {
        TriggerKey { from: self.from.clone(), to: self.to.clone() }
    }
}

impl fmt::Display for TriggerArc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => {}", self.from, self.to)
    }
}

/// Identifies trigger arcs by endpoints; guards are not part of the identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TriggerKey {
    pub from: StageRef,
    pub to: TriggerTarget,
}

impl fmt::Display for TriggerKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => {}", self.from, self.to)
    }
}

/// A named point of nondeterminism with its outcomes in priority order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ChoicePoint {
    pub name: String,
    pub outcomes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct StaticModel {
    pub machines: BTreeMap<String, Machine>,
    pub flows: BTreeSet<FlowArc>,
    pub triggers: BTreeSet<TriggerArc>,
    pub choices: BTreeMap<String, ChoicePoint>,
}

impl StaticModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_machine(&mut self, m: Machine) -> &mut Self {
        self.machines.insert(m.name.clone(), m);
        self
    }

    pub fn add_flow(&mut self, from: StageRef, to: StageRef) -> &mut Self {
        self.flows.insert(FlowArc::new(from, to));
        self
    }

    pub fn add_trigger(&mut self, t: TriggerArc) -> &mut Self {
        self.triggers.insert(t);
        self
    }

    pub fn add_choice(&mut self, name: &str, outcomes: &[&str]) -> &mut Self {
        self.choices.insert(
            name.to_string(),
            ChoicePoint { name: name.to_string(), outcomes: outcomes.iter().map(|o| o.to_string()).collect() },
        );
        self
    }

    /// Every machine with its qualified path, depth first in name order.
    pub fn machines_with_paths(&self) -> Vec<(MachinePath, &Machine)> {
        let mut out = Vec::new();
        fn walk<'a>(prefix: &MachinePath, m: &'a Machine, out: &mut Vec<(MachinePath, &'a Machine)>) {
            let path = prefix.child(&m.name);
            out.push((path.clone(), m));
            for sub in m.submachines.values() {
                walk(&path, sub, out);
            }
        }
        for m in self.machines.values() {
            walk(&MachinePath(Vec::new()), m, &mut out);
        }
        out
    }

    pub fn machine(&self, path: &MachinePath) -> Option<&Machine> {
        let mut segs = path.0.iter();
        let mut cur = self.machines.get(segs.next()?)?;
        for s in segs {
            cur = cur.submachines.get(s)?;
        }
        Some(cur)
    }

    pub fn machine_mut(&mut self, path: &MachinePath) -> Option<&mut Machine> {
        let mut segs = path.0.iter();
        let mut cur = self.machines.get_mut(segs.next()?)?;
        for s in segs {
            cur = cur.submachines.get_mut(s)?;
        }
        Some(cur)
    }

    pub fn has_stage(&self, s: &StageRef) -> bool {
        self.machine(&s.machine).is_some_and(|m| m.stages.contains(&s.kind))
    }

    pub fn flag(&self, r: &SlotRef) -> Option<&Flag> {
        self.machine(&r.machine)?.flags.get(&r.name)
    }

    pub fn storage(&self, r: &SlotRef) -> Option<&Storage> {
        self.machine(&r.machine)?.storage.as_ref().filter(|s| s.name == r.name)
    }

    /// All stages in canonical order.
    pub fn stages(&self) -> Vec<StageRef> {
        self.machines_with_paths()
            .into_iter()
            .flat_map(|(p, m)| m.stages.iter().map(move |k| StageRef::new(p.clone(), *k)).collect::<Vec<_>>())
            .collect()
    }

    pub fn flags(&self) -> Vec<SlotRef> {
        self.machines_with_paths()
            .into_iter()
            .flat_map(|(p, m)| m.flags.keys().map(move |n| SlotRef::new(p.clone(), n.clone())).collect::<Vec<_>>())
            .collect()
    }

    pub fn storages(&self) -> Vec<SlotRef> {
        self.machines_with_paths()
            .into_iter()
            .filter_map(|(p, m)| m.storage.as_ref().map(|s| SlotRef::new(p, s.name.clone())))
            .collect()
    }

    pub fn triggers_from<'a>(&'a self, s: &'a StageRef) -> impl Iterator<Item = &'a TriggerArc> + 'a {
        self.triggers.iter().filter(move |t| &t.from == s)
    }

    pub fn flows_from<'a>(&'a self, s: &'a StageRef) -> impl Iterator<Item = &'a FlowArc> + 'a {
        self.flows.iter().filter(move |f| &f.from == s)
    }

    /// Transfer stages that nothing flows into: where things enter the model.
    pub fn boundary_transfers(&self) -> BTreeSet<StageRef> {
        let fed: BTreeSet<&StageRef> = self.flows.iter().map(|f| &f.to).collect();
        self.stages().into_iter().filter(|s| s.kind == StageKind::Transfer && !fed.contains(s)).collect()
    }

    /// Structural fingerprint; equal models hash equal.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }
}

/// Shorthand used by fixtures and tests: `stage("A.B", Process)`.
pub fn stage(machine: &str, kind: StageKind) -> StageRef {
    StageRef::new(MachinePath::new(machine.split('.')), kind)
}

pub fn slot(machine: &str, name: &str) -> SlotRef {
    SlotRef::new(MachinePath::new(machine.split('.')), name)
}
