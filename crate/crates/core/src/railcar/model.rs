use std::collections::{BTreeMap, BTreeSet};

use crate::dsl::Document;
use crate::dynamics::{BehaviorSpec, EdgeSpec, Element, RegionSpec};
use crate::model::{Guard, Machine, MachinePath, SlotRef, StageKind, StageRef, StaticModel, TriggerArc, TriggerTarget};

use super::{RailcarError, DWELL};

use StageKind::{Process, Receive, Release, Transfer};

pub const PARK_OR_CONTINUE: &str = "park-or-continue";
pub const RELEASE: &str = "release";

/// Name of the behavior in a terminal document.
pub const BEHAVIOR: &str = "railcar";

/// Event texts, indexed by number minus one.
pub const EVENT_TEXT: [&str; 15] = [
    "A railcar enters B, setting B as occupied",
    "B is flagged as approaching",
    "Traffic from P1 and P2 is blocked",
    "The railcar in B is processed while waiting for a decision",
    "T is flagged as unoccupied by the last railcar to leave it",
    "The railcar reserves T and leaves B, resetting approaching",
    "The railcar enters T",
    "The railcar has spent 90 seconds in T",
    "A is flagged as unoccupied by the last railcar to leave it",
    "The railcar leaves T, setting T unoccupied and A occupied",
    "C is flagged as unoccupied by the last railcar to leave it",
    "The railcar leaves A",
    "The railcar moves to C, setting C occupied",
    "In T, the railcar moves to park in a parking spot",
    "A parked railcar moves from P to T, setting T occupied",
];

/// Shape of one terminal's static model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TerminalShape {
    /// Areas between two terminals; 2 leaves out C.
    pub segments: usize,
    pub spots: usize,
}

impl Default for TerminalShape {
    fn default() -> Self {
        TerminalShape { segments: 3, spots: 2 }
    }
}

impl TerminalShape {
    pub fn has_c(&self) -> bool {
        self.segments >= 3
    }

    pub fn has_p(&self) -> bool {
        self.spots > 0
    }

    /// Event numbers present for this shape.
    pub fn event_numbers(&self) -> Vec<usize> {
        (1..=15)
            .filter(|n| match n {
                3 | 14 | 15 => self.has_p(),
                11 | 13 => self.has_c(),
                _ => true,
            })
            .collect()
    }
}

pub fn event_id(n: usize) -> String {
    format!("E{n}")
}

fn st(path: &str, kind: StageKind) -> StageRef {
    StageRef::new(path.parse::<MachinePath>().unwrap(), kind)
}

fn occ(path: &str) -> SlotRef {
    SlotRef::new(path.parse::<MachinePath>().unwrap(), "occupied")
}

fn is(flag: SlotRef, v: &str) -> Guard {
    Guard::FlagIs(flag, v.into())
}

fn area(name: &str, kinds: &[StageKind]) -> Machine {
    Machine::new(name).with_stages(kinds).with_flag("occupied", &["occupied", "unoccupied"], "unoccupied")
}

struct Builder {
    model: StaticModel,
}

impl Builder {
    fn flow(&mut self, a: StageRef, b: StageRef) -> Element {
        self.model.add_flow(a.clone(), b.clone());
        Element::flow(a, b)
    }

    fn trig(&mut self, t: TriggerArc) -> Element {
        let e = Element::Trigger { arc: t.key() };
        self.model.add_trigger(t);
        e
    }
}

/// Builds the static model of one terminal half: B, T, A, optionally C, and
/// the parking machine P with one submachine per spot. The document carries
/// one region per event and the `railcar` behavior.
pub fn build_terminal_model(shape: TerminalShape) -> Result<Document, RailcarError> {
    if shape.segments < 2 {
        return Err(RailcarError::BadParams(format!("segments must be at least 2, got {}", shape.segments)));
    }
    let mut b = Builder { model: StaticModel::new() };
    let s = Element::stage;
    let next_of_a = if shape.has_c() { "C" } else { "B" };

    b.model.add_machine(area("B", &[Transfer, Receive, Process, Release]).with_flag(
        "approaching",
        &["set", "reset"],
        "reset",
    ));
    b.model.add_machine(area("T", &[Transfer, Receive, Process, Release]));
    b.model.add_machine(area("A", &[Transfer, Receive, Release]));
    if shape.has_c() {
        b.model.add_machine(area("C", &[Transfer, Receive, Release]));
    }
    let spots: Vec<String> = (1..=shape.spots).map(|i| format!("P.P{i}")).collect();
    if shape.has_p() {
        let mut p = Machine::new("P").with_stages(&[Transfer]);
        for i in 1..=shape.spots {
            p = p.with_submachine(area(&format!("P{i}"), &[Transfer, Receive, Process, Release]));
        }
        b.model.add_machine(p);
        b.model.add_choice(RELEASE, &["release", "hold"]);
        b.model.add_choice(PARK_OR_CONTINUE, &["continue", "park"]);
    }
    let approaching = SlotRef::new(MachinePath::new(["B"]), "approaching");
    let mut regions: BTreeMap<usize, (Vec<Element>, Element)> = BTreeMap::new();

    // E1: entering B
    let f = b.flow(st("B", Transfer), st("B", Receive));
    let t = b.trig(TriggerArc::assign(st("B", Receive), occ("B"), "occupied"));
    regions.insert(
        1,
        (vec![s(st("B", Transfer)), f, s(st("B", Receive)), t, Element::flag(occ("B"))], s(st("B", Receive))),
    );

    // E2
    let t = b.trig(TriggerArc::assign(st("B", Receive), approaching.clone(), "set"));
    regions.insert(2, (vec![t.clone(), Element::flag(approaching.clone())], t));

    // E4
    let f = b.flow(st("B", Receive), st("B", Process));
    regions.insert(4, (vec![f, s(st("B", Process))], s(st("B", Process))));

    // E6: reservation and leaving B
    let mut e6 = vec![
        b.trig(TriggerArc::to_stage(st("B", Process), st("B", Release)).when(is(occ("T"), "unoccupied"))),
        s(st("B", Release)),
        b.trig(TriggerArc::assign(st("B", Release), occ("T"), "occupied")),
        b.trig(TriggerArc::assign(st("B", Release), occ("B"), "unoccupied")),
        b.trig(TriggerArc::assign(st("B", Release), approaching.clone(), "reset")),
    ];
    e6.push(b.flow(st("B", Release), st("B", Transfer)));
    regions.insert(6, (e6, s(st("B", Release))));

    // E7
    let e7 = vec![
        b.flow(st("B", Transfer), st("T", Transfer)),
        s(st("T", Transfer)),
        b.flow(st("T", Transfer), st("T", Receive)),
        s(st("T", Receive)),
    ];
    regions.insert(7, (e7, s(st("T", Receive))));

    // E8
    let f = b.flow(st("T", Receive), st("T", Process));
    regions.insert(8, (vec![f, s(st("T", Process))], s(st("T", Process))));

    // E5
    let t = b.trig(TriggerArc::assign(st("T", Release), occ("T"), "unoccupied"));
    regions.insert(5, (vec![t.clone(), Element::flag(occ("T"))], t));

    // E10: leaving T for A
    let mut leave_t = is(occ("A"), "unoccupied");
    if shape.has_p() {
        let go = Guard::ChoiceIs(PARK_OR_CONTINUE.into(), "continue".into());
        let park = Guard::ChoiceIs(PARK_OR_CONTINUE.into(), "park".into());
        let free = spots.iter().map(|p| is(occ(p), "unoccupied")).reduce(Guard::or).unwrap();
        leave_t = go.and(leave_t).or(park.and(free));
    }
    let a_occ = b.trig(TriggerArc::assign(st("A", Receive), occ("A"), "occupied"));
    let e10 = vec![
        b.trig(TriggerArc::to_stage(st("T", Process), st("T", Release)).when(leave_t)),
        s(st("T", Release)),
        b.flow(st("T", Release), st("T", Transfer)),
        b.flow(st("T", Transfer), st("A", Transfer)),
        s(st("A", Transfer)),
        b.flow(st("A", Transfer), st("A", Receive)),
        s(st("A", Receive)),
        a_occ.clone(),
    ];
    regions.insert(10, (e10, a_occ));

    // E9
    let t = b.trig(TriggerArc::assign(st("A", Release), occ("A"), "unoccupied"));
    regions.insert(9, (vec![t.clone(), Element::flag(occ("A"))], t));

    // E12
    let e12 = vec![
        b.trig(TriggerArc::to_stage(st("A", Receive), st("A", Release)).when(is(occ(next_of_a), "unoccupied"))),
        s(st("A", Release)),
        b.flow(st("A", Release), st("A", Transfer)),
    ];
    regions.insert(12, (e12, s(st("A", Release))));

    if shape.has_c() {
        // E13
        let e13 = vec![
            b.flow(st("A", Transfer), st("C", Transfer)),
            s(st("C", Transfer)),
            b.flow(st("C", Transfer), st("C", Receive)),
            s(st("C", Receive)),
            b.trig(TriggerArc::assign(st("C", Receive), occ("C"), "occupied")),
        ];
        regions.insert(13, (e13, s(st("C", Receive))));
        // E11: the next terminal's B is a copy of this one
        let unocc = b.trig(TriggerArc::assign(st("C", Release), occ("C"), "unoccupied"));
        let e11 = vec![
            b.trig(TriggerArc::to_stage(st("C", Receive), st("C", Release)).when(is(occ("B"), "unoccupied"))),
            s(st("C", Release)),
            b.flow(st("C", Release), st("C", Transfer)),
            unocc.clone(),
            Element::flag(occ("C")),
        ];
        regions.insert(11, (e11, unocc));
    }

    if shape.has_p() {
        let hub = st("P", Transfer);
        // E3: the parking gates read approaching
        let mut e3 = vec![Element::flag(approaching.clone())];
        let mut e14 = vec![b.flow(st("T", Transfer), hub.clone()), s(hub.clone())];
        let mut e15 = vec![b.flow(hub.clone(), st("T", Transfer))];
        let gate = is(approaching.clone(), "reset")
            .and(is(occ("T"), "unoccupied"))
            .and(Guard::ChoiceIs(RELEASE.into(), "release".into()));
        for p in &spots {
            e3.push(b.trig(TriggerArc::to_stage(st(p, Process), st(p, Release)).when(gate.clone())));
            e14.extend([
                b.flow(hub.clone(), st(p, Transfer)),
                s(st(p, Transfer)),
                b.flow(st(p, Transfer), st(p, Receive)),
                s(st(p, Receive)),
                b.flow(st(p, Receive), st(p, Process)),
                s(st(p, Process)),
                b.trig(TriggerArc::assign(st(p, Receive), occ(p), "occupied")),
                Element::flag(occ(p)),
            ]);
            e15.extend([
                s(st(p, Release)),
                b.flow(st(p, Release), st(p, Transfer)),
                b.flow(st(p, Transfer), hub.clone()),
                b.trig(TriggerArc::assign(st(p, Release), occ(p), "unoccupied")),
                b.trig(TriggerArc::assign(st(p, Release), occ("T"), "occupied")),
            ]);
        }
        regions.insert(3, (e3, Element::flag(approaching)));
        regions.insert(14, (e14, s(hub.clone())));
        regions.insert(15, (e15, Element::flow(hub, st("T", Transfer))));
    }

    let mut doc =
        Document { model: b.model, regions: BTreeMap::new(), events: BTreeMap::new(), behaviors: BTreeMap::new() };
    for (n, (elems, anchor)) in regions {
        let name = format!("R{n}");
        doc.regions.insert(name.clone(), RegionSpec::new(&name, elems, anchor));
        doc.events.insert(event_id(n), name);
    }
    doc.behaviors.insert(BEHAVIOR.into(), behavior_spec(shape));
    Ok(doc)
}

type Edge = (usize, usize, Option<(u64, u64)>);

/// Chronology of the terminal: edges between event numbers with optional
/// delay bounds.
fn edge_list() -> Vec<Edge> {
    vec![
        (1, 2, None),
        (2, 3, None),
        (2, 4, None),
        (4, 6, None),
        (5, 6, None),
        (6, 7, None),
        (7, 8, Some((DWELL, DWELL))),
        (15, 8, Some((DWELL, DWELL))),
        (8, 10, None),
        (8, 14, None),
        (14, 15, None),
        (10, 12, None),
        (12, 13, None),
        (12, 1, None),
        (13, 13, None),
        (13, 1, None),
        (10, 5, None),
        (14, 5, None),
        (12, 9, None),
        (13, 11, None),
        (1, 11, None),
    ]
}

/// Events that may open a chronology: area flags set at start-up, and cars
/// placed initially in A, C or a parking spot.
const STARTS: [usize; 6] = [1, 5, 9, 11, 12, 15];

pub fn behavior_spec(shape: TerminalShape) -> BehaviorSpec {
    let present: BTreeSet<usize> = shape.event_numbers().into_iter().collect();
    let edges = edge_list()
        .into_iter()
        .filter(|(a, b, _)| present.contains(a) && present.contains(b))
        .map(|(a, b, d)| {
            let e = EdgeSpec::new(&event_id(a), &event_id(b));
            match d {
                Some((lo, hi)) => e.delay(lo, Some(hi)),
                None => e,
            }
        })
        .collect();
    BehaviorSpec {
        name: BEHAVIOR.into(),
        starts: STARTS.iter().filter(|n| present.contains(n)).map(|&n| event_id(n)).collect(),
        edges,
    }
}

/// Maps every machine of a terminal model to its counterpart in the half
/// serving the opposite direction.
pub fn mirror_name(name: &str) -> String {
    format!("{name}_mirror")
}

fn mirror_path(p: &MachinePath) -> MachinePath {
    let mut segs = p.0.clone();
    segs[0] = mirror_name(&segs[0]);
    MachinePath(segs)
}

fn mirror_stage(s: &StageRef) -> StageRef {
    StageRef::new(mirror_path(&s.machine), s.kind)
}

fn mirror_slot(s: &SlotRef) -> SlotRef {
    SlotRef::new(mirror_path(&s.machine), s.name.clone())
}

fn mirror_guard(g: &Guard) -> Guard {
    match g {
        Guard::FlagIs(f, v) => Guard::FlagIs(mirror_slot(f), v.clone()),
        Guard::StorageAtLeast(f, n) => Guard::StorageAtLeast(mirror_slot(f), *n),
        Guard::StorageBelow(f, n) => Guard::StorageBelow(mirror_slot(f), *n),
        Guard::ChoiceIs(c, v) => Guard::ChoiceIs(c.clone(), v.clone()),
        Guard::Not(a) => mirror_guard(a).not(),
        Guard::And(a, b) => mirror_guard(a).and(mirror_guard(b)),
        Guard::Or(a, b) => mirror_guard(a).or(mirror_guard(b)),
    }
}

/// The opposite-direction half of a terminal, generated from the original by
/// renaming every top-level machine.
pub fn mirror(model: &StaticModel) -> StaticModel {
    let mut out = StaticModel::new();
    for m in model.machines.values() {
        let mut m = m.clone();
        m.name = mirror_name(&m.name);
        out.add_machine(m);
    }
    for f in &model.flows {
        out.add_flow(mirror_stage(&f.from), mirror_stage(&f.to));
    }
    for t in &model.triggers {
        let to = match &t.to {
            TriggerTarget::Stage { stage } => TriggerTarget::Stage { stage: mirror_stage(stage) },
            TriggerTarget::Assign { flag, value } => {
                TriggerTarget::Assign { flag: mirror_slot(flag), value: value.clone() }
            }
        };
        out.add_trigger(TriggerArc { from: mirror_stage(&t.from), to, guard: t.guard.as_ref().map(mirror_guard) });
    }
    out.choices = model.choices.clone();
    out
}

/// Position of each top-level machine along the track, in the direction of
/// travel of the original half; T and P sit at 0.
pub fn layout(model: &StaticModel) -> BTreeMap<String, i64> {
    let order = [("B", -1), ("T", 0), ("P", 0), ("A", 1), ("C", 2)];
    order.iter().filter(|(n, _)| model.machines.contains_key(*n)).map(|(n, p)| (n.to_string(), *p)).collect()
}

/// Layout of the mirrored half: the same areas, met in the opposite order.
pub fn mirror_layout(layout: &BTreeMap<String, i64>) -> BTreeMap<String, i64> {
    layout.iter().map(|(n, p)| (mirror_name(n), -p)).collect()
}

fn machine_label(m: &crate::model::Machine, depth: usize) -> String {
    let flags: Vec<String> =
        m.flags.values().map(|f| format!("{}:{}:{}", f.name, f.values.join("|"), f.initial)).collect();
    format!("{depth};{:?};{};{:?};{}", m.stages, flags.join(","), m.storage, m.submachines.len())
}

fn map_stage(phi: &BTreeMap<MachinePath, MachinePath>, s: &StageRef) -> Option<StageRef> {
    Some(StageRef::new(phi.get(&s.machine)?.clone(), s.kind))
}

fn map_slot(phi: &BTreeMap<MachinePath, MachinePath>, s: &SlotRef) -> Option<SlotRef> {
    Some(SlotRef::new(phi.get(&s.machine)?.clone(), s.name.clone()))
}

fn map_guard(phi: &BTreeMap<MachinePath, MachinePath>, g: &Guard) -> Option<Guard> {
    Some(match g {
        Guard::FlagIs(f, v) => Guard::FlagIs(map_slot(phi, f)?, v.clone()),
        Guard::StorageAtLeast(f, n) => Guard::StorageAtLeast(map_slot(phi, f)?, *n),
        Guard::StorageBelow(f, n) => Guard::StorageBelow(map_slot(phi, f)?, *n),
        Guard::ChoiceIs(c, v) => Guard::ChoiceIs(c.clone(), v.clone()),
        Guard::Not(a) => map_guard(phi, a)?.not(),
        Guard::And(a, b) => map_guard(phi, a)?.and(map_guard(phi, b)?),
        Guard::Or(a, b) => map_guard(phi, a)?.or(map_guard(phi, b)?),
    })
}

fn arcs_match(a: &StaticModel, b: &StaticModel, phi: &BTreeMap<MachinePath, MachinePath>) -> bool {
    let flows: Option<BTreeSet<_>> = a
        .flows
        .iter()
        .map(|f| Some(crate::model::FlowArc::new(map_stage(phi, &f.from)?, map_stage(phi, &f.to)?)))
        .collect();
    if flows.as_ref() != Some(&b.flows) {
        return false;
    }
    let triggers: Option<BTreeSet<_>> = a
        .triggers
        .iter()
        .map(|t| {
            let to = match &t.to {
                TriggerTarget::Stage { stage } => TriggerTarget::Stage { stage: map_stage(phi, stage)? },
                TriggerTarget::Assign { flag, value } => {
                    TriggerTarget::Assign { flag: map_slot(phi, flag)?, value: value.clone() }
                }
            };
            let guard = match &t.guard {
                Some(g) => Some(map_guard(phi, g)?),
                None => None,
            };
            Some(TriggerArc { from: map_stage(phi, &t.from)?, to, guard })
        })
        .collect();
    triggers.as_ref() == Some(&b.triggers) && a.choices == b.choices
}

/// Searches for a machine bijection from `a` onto `b` that preserves stages,
/// flags, nesting, every flow and trigger (guards included) and reflects the
/// track: a machine at position `x` in `a` must land at `-x` in `b`.
/// Names play no part in the search.
pub fn mirror_isomorphism(
    a: &StaticModel,
    layout_a: &BTreeMap<String, i64>,
    b: &StaticModel,
    layout_b: &BTreeMap<String, i64>,
) -> Option<BTreeMap<MachinePath, MachinePath>> {
    let nodes = |m: &StaticModel, lay: &BTreeMap<String, i64>, sign: i64| -> Vec<(MachinePath, String)> {
        m.machines_with_paths()
            .into_iter()
            .map(|(p, mach)| {
                let pos = lay.get(&p.0[0]).map(|x| x * sign);
                let label = format!("{};{pos:?}", machine_label(mach, p.0.len()));
                (p, label)
            })
            .collect()
    };
    let na = nodes(a, layout_a, -1);
    let nb = nodes(b, layout_b, 1);
    if na.len() != nb.len() {
        return None;
    }
    let mut phi = BTreeMap::new();
    let mut used = BTreeSet::new();
    fn go(
        i: usize,
        na: &[(MachinePath, String)],
        nb: &[(MachinePath, String)],
        a: &StaticModel,
        b: &StaticModel,
        phi: &mut BTreeMap<MachinePath, MachinePath>,
        used: &mut BTreeSet<usize>,
    ) -> bool {
        if i == na.len() {
            return arcs_match(a, b, phi);
        }
        let (pa, la) = &na[i];
        for (j, (pb, lb)) in nb.iter().enumerate() {
            if used.contains(&j) || la != lb {
                continue;
            }
            // nesting must be preserved; parents come first in path order
            let parent_ok = match (pa.parent(), pb.parent()) {
                (None, None) => true,
                (Some(x), Some(y)) => phi.get(&x) == Some(&y),
                _ => false,
            };
            if !parent_ok {
                continue;
            }
            phi.insert(pa.clone(), pb.clone());
            used.insert(j);
            if go(i + 1, na, nb, a, b, phi, used) {
                return true;
            }
            phi.remove(pa);
            used.remove(&j);
        }
        false
    }
    go(0, &na, &nb, a, b, &mut phi, &mut used).then_some(phi)
}
