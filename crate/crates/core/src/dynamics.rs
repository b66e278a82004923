//! Event regions over a static model, events (region + time) and behavioral
//! models (chronology graphs over events).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::model::{FlowArc, Guard, SlotRef, StageKind, StageRef, StaticModel, TriggerKey, TriggerTarget};

/// Anything a region may contain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Element {
    Stage { stage: StageRef },
    Flow { arc: FlowArc },
    Trigger { arc: TriggerKey },
    Flag { flag: SlotRef },
    Storage { storage: SlotRef },
}

impl Element {
    pub fn stage(s: StageRef) -> Self {
        Element::Stage { stage: s }
    }

    pub fn flow(from: StageRef, to: StageRef) -> Self {
        Element::Flow { arc: FlowArc::new(from, to) }
    }

    pub fn trigger(from: StageRef, to: TriggerTarget) -> Self {
        Element::Trigger { arc: TriggerKey { from, to } }
    }

    pub fn flag(f: SlotRef) -> Self {
        Element::Flag { flag: f }
    }

    pub fn storage(s: SlotRef) -> Self {
        Element::Storage { storage: s }
    }

    pub fn resolves_in(&self, model: &StaticModel) -> bool {
        match self {
            Element::Stage { stage } => model.has_stage(stage),
            Element::Flow { arc } => model.flows.contains(arc),
            Element::Trigger { arc } => model.triggers.iter().any(|t| &t.key() == arc),
            Element::Flag { flag } => model.flag(flag).is_some(),
            Element::Storage { storage } => model.storage(storage).is_some(),
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Stage { stage } => write!(f, "{stage}"),
            Element::Flow { arc } => write!(f, "flow {arc}"),
            Element::Trigger { arc } => write!(f, "trigger {} -> {}", arc.from, arc.to),
            Element::Flag { flag } => write!(f, "flag {flag}"),
            Element::Storage { storage } => write!(f, "storage {storage}"),
        }
    }
}

/// Every element of a model, for coverage.
pub fn model_elements(model: &StaticModel) -> BTreeSet<Element> {
    let mut out = BTreeSet::new();
    out.extend(model.stages().into_iter().map(Element::stage));
    out.extend(model.flows.iter().map(|a| Element::Flow { arc: a.clone() }));
    out.extend(model.triggers.iter().map(|t| Element::Trigger { arc: t.key() }));
    out.extend(model.flags().into_iter().map(Element::flag));
    out.extend(model.storages().into_iter().map(Element::storage));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DynamicsError {
    #[error("EMPTY_REGION: region '{0}' has no elements")]
    EmptyRegion(String),
    #[error("ANCHOR_NOT_IN_REGION: anchor of region '{0}' is not one of its elements")]
    AnchorNotInRegion(String),
    #[error("UNRESOLVED_ELEMENT: region '{region}' references missing {element}")]
    UnresolvedElement { region: String, element: String },
    #[error("DISCONNECTED_REGION: region '{0}' splits into {1} components")]
    Disconnected(String, usize),
    #[error("DUPLICATE_EVENT_ID: event '{0}' already exists")]
    DuplicateEventId(String),
    #[error("UNKNOWN_EVENT: '{0}' is not a declared event")]
    UnknownEvent(String),
    #[error("BAD_DELAY: edge {0} -> {1} has min greater than max")]
    BadDelay(String, String),
    #[error("MIXED_MODELS: events reference regions of different static models")]
    MixedModels,
    #[error("NOT_ANCHORED: behavior has no events")]
    NotAnchored,
}

impl DynamicsError {
    pub fn code(&self) -> &'static str {
        match self {
            DynamicsError::EmptyRegion(_) => "EMPTY_REGION",
            DynamicsError::AnchorNotInRegion(_) => "ANCHOR_NOT_IN_REGION",
            DynamicsError::UnresolvedElement { .. } => "UNRESOLVED_ELEMENT",
            DynamicsError::Disconnected(..) => "DISCONNECTED_REGION",
            DynamicsError::DuplicateEventId(_) => "DUPLICATE_EVENT_ID",
            DynamicsError::UnknownEvent(_) => "UNKNOWN_EVENT",
            DynamicsError::BadDelay(..) => "BAD_DELAY",
            DynamicsError::MixedModels => "MIXED_MODELS",
            DynamicsError::NotAnchored => "NOT_ANCHORED",
        }
    }
}

/// Plain region declaration as written in a source file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct RegionSpec {
    pub name: String,
    pub elements: BTreeSet<Element>,
    pub anchor: Element,
}

impl RegionSpec {
    pub fn new(name: &str, elements: impl IntoIterator<Item = Element>, anchor: Element) -> Self {
        RegionSpec { name: name.to_string(), elements: elements.into_iter().collect(), anchor }
    }
}

/// A connected piece of a static model where a change can occur.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRegion {
    spec: RegionSpec,
    model: Arc<StaticModel>,
}

impl EventRegion {
    pub fn new(model: &Arc<StaticModel>, spec: RegionSpec) -> Result<Self, DynamicsError> {
        if spec.elements.is_empty() {
            return Err(DynamicsError::EmptyRegion(spec.name));
        }
        if !spec.elements.contains(&spec.anchor) {
            return Err(DynamicsError::AnchorNotInRegion(spec.name));
        }
        if let Some(e) = spec.elements.iter().find(|e| !e.resolves_in(model)) {
            return Err(DynamicsError::UnresolvedElement { region: spec.name.clone(), element: e.to_string() });
        }
        let parts = components(model, &spec.elements);
        if parts > 1 {
            return Err(DynamicsError::Disconnected(spec.name, parts));
        }
        Ok(EventRegion { spec, model: Arc::clone(model) })
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn elements(&self) -> &BTreeSet<Element> {
        &self.spec.elements
    }

    pub fn anchor(&self) -> &Element {
        &self.spec.anchor
    }

    pub fn spec(&self) -> &RegionSpec {
        &self.spec
    }

    pub fn model(&self) -> &Arc<StaticModel> {
        &self.model
    }

    /// Whether the region touches a transfer stage where things enter the model.
    pub fn touches_boundary(&self) -> bool {
        let boundary = self.model.boundary_transfers();
        self.spec.elements.iter().any(|e| match e {
            Element::Stage { stage } => boundary.contains(stage),
            _ => false,
        })
    }
}

fn guard_flags(g: &Guard) -> Vec<&SlotRef> {
    g.atoms()
        .into_iter()
        .filter_map(|a| match a {
            Guard::FlagIs(f, _) => Some(f),
            _ => None,
        })
        .collect()
}

/// Number of weakly connected components of `elements` in the static graph.
fn components(model: &StaticModel, elements: &BTreeSet<Element>) -> usize {
    let items: Vec<&Element> = elements.iter().collect();
    let linked = |a: &Element, b: &Element| -> bool {
        use Element as E;
        match (a, b) {
            (E::Stage { stage: x }, E::Stage { stage: y }) => {
                model.flows.iter().any(|f| (&f.from == x && &f.to == y) || (&f.from == y && &f.to == x))
                    || model.triggers.iter().any(|t| {
                        matches!(&t.to, TriggerTarget::Stage { stage } if (&t.from == x && stage == y) || (&t.from == y && stage == x))
                    })
            }
            (E::Flow { arc }, E::Stage { stage }) | (E::Stage { stage }, E::Flow { arc }) => {
                &arc.from == stage || &arc.to == stage
            }
            (E::Trigger { arc }, E::Stage { stage }) | (E::Stage { stage }, E::Trigger { arc }) => {
                &arc.from == stage || matches!(&arc.to, TriggerTarget::Stage { stage: s } if s == stage)
            }
            (E::Trigger { arc }, E::Flag { flag }) | (E::Flag { flag }, E::Trigger { arc }) => {
                matches!(&arc.to, TriggerTarget::Assign { flag: f, .. } if f == flag)
                    || model
                        .triggers
                        .iter()
                        .filter(|t| &t.key() == arc)
                        .filter_map(|t| t.guard.as_ref())
                        .any(|g| guard_flags(g).contains(&flag))
            }
            (E::Stage { stage }, E::Flag { flag }) | (E::Flag { flag }, E::Stage { stage }) => {
                stage.machine == flag.machine
                    || model.triggers.iter().any(|t| {
                        &t.from == stage && matches!(&t.to, TriggerTarget::Assign { flag: f, .. } if f == flag)
                    })
            }
            (E::Stage { stage }, E::Storage { storage }) | (E::Storage { storage }, E::Stage { stage }) => {
                stage.machine == storage.machine
            }
            (E::Flow { arc: f }, E::Flow { arc: g }) => f.to == g.from || g.to == f.from || f.from == g.from || f.to == g.to,
            (E::Trigger { arc: t }, E::Flow { arc: f }) | (E::Flow { arc: f }, E::Trigger { arc: t }) => {
                t.from == f.to || t.from == f.from || matches!(&t.to, TriggerTarget::Stage { stage } if stage == &f.from || stage == &f.to)
            }
            (E::Trigger { arc: a }, E::Trigger { arc: b }) => {
                a.from == b.from
                    || matches!(&a.to, TriggerTarget::Stage { stage } if stage == &b.from)
                    || matches!(&b.to, TriggerTarget::Stage { stage } if stage == &a.from)
            }
            _ => false,
        }
    };
    let mut comp = vec![usize::MAX; items.len()];
    let mut n = 0;
    for start in 0..items.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = n;
        let mut q = VecDeque::from([start]);
        while let Some(i) = q.pop_front() {
            for j in 0..items.len() {
                if comp[j] == usize::MAX && linked(items[i], items[j]) {
                    comp[j] = n;
                    q.push_back(j);
                }
            }
        }
        n += 1;
    }
    n
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub covered: BTreeSet<Element>,
    pub uncovered: BTreeSet<Element>,
    /// Elements claimed by more than one region, with the claiming regions.
    pub overlap: BTreeMap<Element, Vec<String>>,
}

/// Which model elements the regions cover. Overlap is reported, not an error.
pub fn coverage(model: &StaticModel, regions: &[RegionSpec]) -> Result<CoverageReport, DynamicsError> {
    let all = model_elements(model);
    let mut owners: BTreeMap<Element, BTreeSet<String>> = BTreeMap::new();
    for r in regions {
        for e in &r.elements {
            if !all.contains(e) {
                return Err(DynamicsError::UnresolvedElement { region: r.name.clone(), element: e.to_string() });
            }
            owners.entry(e.clone()).or_default().insert(r.name.clone());
        }
    }
    let mut overlap = BTreeMap::new();
    // a region listed twice still counts as overlap
    let mut counts: BTreeMap<&Element, usize> = BTreeMap::new();
    for r in regions {
        for e in &r.elements {
            *counts.entry(e).or_default() += 1;
        }
    }
    for (e, c) in counts {
        if c > 1 {
            let mut names: Vec<String> =
                regions.iter().filter(|r| r.elements.contains(e)).map(|r| r.name.clone()).collect();
            names.sort();
            overlap.insert(e.clone(), names);
        }
    }
    let covered: BTreeSet<Element> = owners.keys().cloned().collect();
    let uncovered = all.difference(&covered).cloned().collect();
    Ok(CoverageReport { covered, uncovered, overlap })
}

/// The time part of an event. Unbound until a simulation stamps an occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeSubmachine {
    pub stages: [StageKind; 2],
    pub stamp: Option<u64>,
}

impl TimeSubmachine {
    pub fn unbound() -> Self {
        TimeSubmachine { stages: [StageKind::Receive, StageKind::Process], stamp: None }
    }
}

/// Region plus time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub id: String,
    pub region: EventRegion,
    pub time: TimeSubmachine,
}

/// Registry that hands out events with unique ids.
#[derive(Debug, Clone, Default)]
pub struct EventSet {
    events: BTreeMap<String, Event>,
}

impl EventSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mk_event(&mut self, region: &EventRegion, id: &str) -> Result<&Event, DynamicsError> {
        if self.events.contains_key(id) {
            return Err(DynamicsError::DuplicateEventId(id.to_string()));
        }
        let ev = Event { id: id.to_string(), region: region.clone(), time: TimeSubmachine::unbound() };
        Ok(self.events.entry(id.to_string()).or_insert(ev))
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Event> {
        self.events.get(id)
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events.into_values().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DelayBounds {
    pub min: u64,
    /// `None` is unbounded.
    pub max: Option<u64>,
}

impl DelayBounds {
    pub const ANY: DelayBounds = DelayBounds { min: 0, max: None };

    pub fn new(min: u64, max: Option<u64>) -> Self {
        DelayBounds { min, max }
    }

    pub fn contains(&self, gap: u64) -> bool {
        gap >= self.min && self.max.is_none_or(|m| gap <= m)
    }
}

impl Default for DelayBounds {
    fn default() -> Self {
        DelayBounds::ANY
    }
}

impl fmt::Display for DelayBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(m) => write!(f, "[{}, {}]", self.min, m),
            None => write!(f, "[{}, inf]", self.min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub delay: DelayBounds,
}

impl EdgeSpec {
    pub fn new(from: &str, to: &str) -> Self {
        EdgeSpec { from: from.to_string(), to: to.to_string(), delay: DelayBounds::ANY }
    }

    pub fn delay(mut self, min: u64, max: Option<u64>) -> Self {
        self.delay = DelayBounds::new(min, max);
        self
    }
}

/// Behavior declaration as written in a source file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct BehaviorSpec {
    pub name: String,
    /// Explicit start events; empty means derive them from the regions.
    pub starts: BTreeSet<String>,
    pub edges: BTreeSet<EdgeSpec>,
}

/// Chronology graph over events.
#[derive(Debug, Clone)]
pub struct BehavioralModel {
    pub events: BTreeMap<String, Event>,
    pub edges: BTreeMap<(String, String), DelayBounds>,
    pub starts: BTreeSet<String>,
    pub warnings: Vec<String>,
}

/// Builds and checks a behavioral model. Without explicit `starts`, every event
/// whose region touches a boundary transfer stage is a start event.
pub fn build_behavior(
    events: impl IntoIterator<Item = Event>,
    edges: &[EdgeSpec],
    starts: Option<&[String]>,
) -> Result<BehavioralModel, DynamicsError> {
    let events: BTreeMap<String, Event> = events.into_iter().map(|e| (e.id.clone(), e)).collect();
    let mut map = BTreeMap::new();
    for e in edges {
        for end in [&e.from, &e.to] {
            if !events.contains_key(end) {
                return Err(DynamicsError::UnknownEvent(end.clone()));
            }
        }
        if e.delay.max.is_some_and(|m| m < e.delay.min) {
            return Err(DynamicsError::BadDelay(e.from.clone(), e.to.clone()));
        }
        map.insert((e.from.clone(), e.to.clone()), e.delay);
    }
    let starts: BTreeSet<String> = match starts {
        Some(s) => {
            for id in s {
                if !events.contains_key(id) {
                    return Err(DynamicsError::UnknownEvent(id.clone()));
                }
            }
            s.iter().cloned().collect()
        }
        None => events.values().filter(|e| e.region.touches_boundary()).map(|e| e.id.clone()).collect(),
    };
    let mut b = BehavioralModel { events, edges: map, starts, warnings: Vec::new() };
    let reach = b.reachable();
    b.warnings = b
        .events
        .keys()
        .filter(|id| !reach.contains(*id))
        .map(|id| format!("event {id} is unreachable from every start event"))
        .collect();
    Ok(b)
}

impl BehavioralModel {
    pub fn edge(&self, from: &str, to: &str) -> Option<DelayBounds> {
        self.edges.get(&(from.to_string(), to.to_string())).copied()
    }

    pub fn successors<'a>(&'a self, from: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.keys().filter(move |(f, _)| f == from).map(|(_, t)| t.as_str())
    }

    /// Events reachable from a start event. A lone event with no edges counts
    /// as reachable.
    pub fn reachable(&self) -> BTreeSet<String> {
        let mut seen: BTreeSet<String> = self.starts.clone();
        if self.events.len() == 1 && self.edges.is_empty() {
            seen.extend(self.events.keys().cloned());
        }
        let mut q: VecDeque<String> = seen.iter().cloned().collect();
        while let Some(e) = q.pop_front() {
            for s in self.successors(&e) {
                if seen.insert(s.to_string()) {
                    q.push_back(s.to_string());
                }
            }
        }
        seen
    }

    /// The single static model all events are anchored to.
    pub fn static_of(&self) -> Result<&Arc<StaticModel>, DynamicsError> {
        let mut it = self.events.values().map(|e| e.region.model());
        let first = it.next().ok_or(DynamicsError::NotAnchored)?;
        let fp = first.fingerprint();
        if it.any(|m| !Arc::ptr_eq(m, first) && m.fingerprint() != fp) {
            return Err(DynamicsError::MixedModels);
        }
        Ok(first)
    }

    /// Events keyed by what activates them.
    pub fn anchors(&self) -> BTreeMap<Element, Vec<String>> {
        let mut out: BTreeMap<Element, Vec<String>> = BTreeMap::new();
        for e in self.events.values() {
            out.entry(e.region.anchor().clone()).or_default().push(e.id.clone());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{stage, Machine, StageKind::*};

    fn model() -> Arc<StaticModel> {
        let mut m = StaticModel::new();
        m.add_machine(Machine::new("M").with_stages(&[Transfer, Receive, Process]));
        m.add_machine(Machine::new("N").with_stages(&[Process]));
        m.add_flow(stage("M", Transfer), stage("M", Receive));
        m.add_flow(stage("M", Receive), stage("M", Process));
        Arc::new(m)
    }

    #[test]
    fn disconnected_region_is_rejected() {
        let m = model();
        let spec = RegionSpec::new(
            "X",
            [Element::stage(stage("M", Transfer)), Element::stage(stage("N", Process))],
            Element::stage(stage("N", Process)),
        );
        assert_eq!(EventRegion::new(&m, spec).unwrap_err().code(), "DISCONNECTED_REGION");
    }

    #[test]
    fn arc_joins_its_endpoints() {
        let m = model();
        let spec = RegionSpec::new(
            "X",
            [
                Element::stage(stage("M", Transfer)),
                Element::flow(stage("M", Transfer), stage("M", Receive)),
                Element::stage(stage("M", Receive)),
            ],
            Element::stage(stage("M", Transfer)),
        );
        assert!(EventRegion::new(&m, spec).is_ok());
    }

    #[test]
    fn anchor_must_be_member() {
        let m = model();
        let spec = RegionSpec::new("X", [Element::stage(stage("M", Transfer))], Element::stage(stage("N", Process)));
        assert_eq!(EventRegion::new(&m, spec).unwrap_err().code(), "ANCHOR_NOT_IN_REGION");
    }

    #[test]
    fn duplicate_event_ids() {
        let m = model();
        let r = EventRegion::new(
            &m,
            RegionSpec::new("R", [Element::stage(stage("N", Process))], Element::stage(stage("N", Process))),
        )
        .unwrap();
        let mut set = EventSet::new();
        set.mk_event(&r, "E_R").unwrap();
        assert_eq!(set.mk_event(&r, "E_R").unwrap_err().code(), "DUPLICATE_EVENT_ID");
    }

    #[test]
    fn single_event_behavior_is_reachable() {
        let m = model();
        let r = EventRegion::new(
            &m,
            RegionSpec::new("R", [Element::stage(stage("N", Process))], Element::stage(stage("N", Process))),
        )
        .unwrap();
        let mut set = EventSet::new();
        set.mk_event(&r, "E").unwrap();
        let b = build_behavior(set.into_events(), &[], None).unwrap();
        assert!(b.warnings.is_empty());
        assert!(b.starts.is_empty());
        let err = build_behavior(Vec::new(), &[EdgeSpec::new("E", "F")], None).unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_EVENT");
    }

    #[test]
    fn empty_behavior_is_not_anchored() {
        let b = build_behavior(Vec::new(), &[], None).unwrap();
        assert_eq!(b.static_of().unwrap_err().code(), "NOT_ANCHORED");
    }

    #[test]
    fn mixed_models_detected() {
        let a = model();
        let mut other = (*model()).clone();
        other.add_machine(Machine::new("Z").with_stages(&[Create]));
        let b = Arc::new(other);
        let ra = EventRegion::new(
            &a,
            RegionSpec::new("R", [Element::stage(stage("N", Process))], Element::stage(stage("N", Process))),
        )
        .unwrap();
        let rb = EventRegion::new(
            &b,
            RegionSpec::new("R", [Element::stage(stage("Z", Create))], Element::stage(stage("Z", Create))),
        )
        .unwrap();
        let mut set = EventSet::new();
        set.mk_event(&ra, "A").unwrap();
        set.mk_event(&rb, "B").unwrap();
        let beh = build_behavior(set.into_events(), &[], None).unwrap();
        assert_eq!(beh.static_of().unwrap_err().code(), "MIXED_MODELS");
    }
}
