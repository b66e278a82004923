//! State-transition tables: CSV import, direct execution, translation into a
//! TM model and an exhaustive equivalence check between the two.
//!
//! Table entries in the EVENT column are called signals here, to keep them
//! apart from TM events (region plus time).

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dsl::{Document, KEYWORDS};
use crate::dynamics::{BehaviorSpec, BehavioralModel, DynamicsError, EdgeSpec, Element, RegionSpec};
use crate::model::{Guard, Machine, MachinePath, SlotRef, StageKind, StageRef, StaticModel, TriggerArc, TriggerKey};
use crate::sim::{check_trace, SimConfig, Simulator, Stimulus};

const COLUMNS: [&str; 4] = ["STATE", "EVENT", "ACTION", "NEXT STATE"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("MISSING_COLUMN: no '{0}' column in the header")]
    MissingColumn(String),
    #[error("NONDETERMINISTIC_TABLE: ({state}, {signal}) appears on rows {first} and {second}")]
    Nondeterministic { state: String, signal: String, first: usize, second: usize },
    #[error("EMPTY_TABLE: no transitions")]
    Empty,
    #[error("UNKNOWN_INITIAL: '{0}' does not appear in the table")]
    UnknownInitial(String),
    #[error("UNHANDLED_EVENT: no row for signal '{signal}' in state '{state}' (input {index})")]
    Unhandled { index: usize, state: String, signal: String },
    #[error("BAD_CSV: {0}")]
    Csv(String),
    #[error("BAD_LENGTH: maximum sequence length must be at least 1")]
    BadLength,
    #[error("BAD_BUNDLE: {0}")]
    Bundle(String),
}

impl TableError {
    pub fn code(&self) -> &'static str {
        match self {
            TableError::MissingColumn(_) => "MISSING_COLUMN",
            TableError::Nondeterministic { .. } => "NONDETERMINISTIC_TABLE",
            TableError::Empty => "EMPTY_TABLE",
            TableError::UnknownInitial(_) => "UNKNOWN_INITIAL",
            TableError::Unhandled { .. } => "UNHANDLED_EVENT",
            TableError::Csv(_) => "BAD_CSV",
            TableError::BadLength => "BAD_LENGTH",
            TableError::Bundle(_) => "BAD_BUNDLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Row {
    pub state: String,
    pub signal: String,
    pub action: String,
    pub next: String,
}

impl Row {
    pub fn new(state: &str, signal: &str, action: &str, next: &str) -> Self {
        Row { state: state.into(), signal: signal.into(), action: action.into(), next: next.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateTable {
    pub rows: Vec<Row>,
    pub initial: String,
}

impl StateTable {
    /// Checks determinism; `initial` must appear in some row unless there are none.
    pub fn new(rows: Vec<Row>, initial: &str) -> Result<Self, TableError> {
        let mut seen: BTreeMap<(&str, &str), usize> = BTreeMap::new();
        for (i, r) in rows.iter().enumerate() {
            if let Some(&first) = seen.get(&(r.state.as_str(), r.signal.as_str())) {
                return Err(TableError::Nondeterministic {
                    state: r.state.clone(),
                    signal: r.signal.clone(),
                    first: first + 1,
                    second: i + 1,
                });
            }
            seen.insert((&r.state, &r.signal), i);
        }
        if !rows.is_empty() && !rows.iter().any(|r| r.state == initial || r.next == initial) {
            return Err(TableError::UnknownInitial(initial.to_string()));
        }
        Ok(StateTable { rows, initial: initial.to_string() })
    }

    /// All states in order of first appearance, initial first.
    pub fn states(&self) -> Vec<&str> {
        let mut out = vec![self.initial.as_str()];
        for r in &self.rows {
            for s in [&r.state, &r.next] {
                if !out.contains(&s.as_str()) {
                    out.push(s);
                }
            }
        }
        out
    }

    /// Signal alphabet in order of first appearance.
    pub fn signals(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.signal.as_str()) {
                out.push(&r.signal);
            }
        }
        out
    }

    pub fn row_for(&self, state: &str, signal: &str) -> Option<(usize, &Row)> {
        self.rows.iter().enumerate().find(|(_, r)| r.state == state && r.signal == signal)
    }
}

/// Reads a table with header `STATE,EVENT,ACTION,NEXT STATE` (any case, any
/// column order). The initial state is the first row's state unless given.
pub fn parse_table(text: &str, initial: Option<&str>) -> Result<StateTable, TableError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| TableError::Csv(e.to_string()))?.clone();
    let mut idx = [0usize; 4];
    for (k, col) in COLUMNS.iter().enumerate() {
        idx[k] = header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(col))
            .ok_or_else(|| TableError::MissingColumn(col.to_string()))?;
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| TableError::Csv(e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let field = |k: usize| rec.get(idx[k]).unwrap_or("").to_string();
        let row = Row { state: field(0), signal: field(1), action: field(2), next: field(3) };
        if row.state.is_empty() || row.signal.is_empty() || row.next.is_empty() {
            return Err(TableError::Csv(format!("row {} has an empty cell", rows.len() + 1)));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(TableError::Empty);
    }
    let init = initial.map(str::to_string).unwrap_or_else(|| rows[0].state.clone());
    StateTable::new(rows, &init)
}

/// Folds signals through the table and returns `(action, next state)` per input.
pub fn run_table(table: &StateTable, inputs: &[&str]) -> Result<Vec<(String, String)>, TableError> {
    let mut state = table.initial.as_str();
    let mut out = Vec::with_capacity(inputs.len());
    for (index, sig) in inputs.iter().enumerate() {
        let (_, row) = table.row_for(state, sig).ok_or_else(|| TableError::Unhandled {
            index,
            state: state.to_string(),
            signal: sig.to_string(),
        })?;
        out.push((row.action.clone(), row.next.clone()));
        state = &row.next;
    }
    Ok(out)
}

/// A TM model built from a table, with the bookkeeping needed to relate
/// simulated traces back to table rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmBundle {
    pub doc: Document,
    pub behavior: String,
    /// Signal to the boundary transfer stage that receives it.
    pub inputs: BTreeMap<String, String>,
    /// Event id of each row's region, indexed like the table rows.
    pub row_events: Vec<Option<String>>,
    /// Fully qualified control flag, absent for one-state tables.
    pub control: Option<String>,
    /// Table state to flag value.
    pub state_values: BTreeMap<String, String>,
}

impl TmBundle {
    pub fn behavior_model(&self) -> Result<BehavioralModel, DynamicsError> {
        self.doc.behavior(&self.behavior)
    }

    /// Removes a trigger arc along with any region anchored on it (and that
    /// region's event). Used to seed faults.
    pub fn without_trigger(&self, key: &TriggerKey) -> TmBundle {
        let mut b = self.clone();
        b.doc.model.triggers.retain(|t| &t.key() != key);
        let gone = Element::Trigger { arc: key.clone() };
        let mut dropped = BTreeSet::new();
        b.doc.regions.retain(|name, r| {
            r.elements.remove(&gone);
            let keep = r.anchor != gone && !r.elements.is_empty();
            if !keep {
                dropped.insert(name.clone());
            }
            keep
        });
        let dead: BTreeSet<String> =
            b.doc.events.iter().filter(|(_, r)| dropped.contains(*r)).map(|(e, _)| e.clone()).collect();
        b.doc.events.retain(|e, _| !dead.contains(e));
        for spec in b.doc.behaviors.values_mut() {
            spec.edges.retain(|e| !dead.contains(&e.from) && !dead.contains(&e.to));
            spec.starts.retain(|s| !dead.contains(s));
        }
        for ev in b.row_events.iter_mut() {
            if ev.as_ref().is_some_and(|e| dead.contains(e)) {
                *ev = None;
            }
        }
        b
    }

    /// The trigger that performs row `i`'s action.
    pub fn row_trigger(&self, i: usize) -> Option<TriggerKey> {
        let ev = self.row_events.get(i)?.as_ref()?;
        let region = self.doc.events.get(ev)?;
        match &self.doc.regions.get(region)?.anchor {
            Element::Trigger { arc } => Some(arc.clone()),
            _ => None,
        }
    }
}

/// Identifier-safe form of a table label.
fn ident(label: &str) -> String {
    let mut s: String = label.trim().chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) || KEYWORDS.contains(&s.as_str()) {
        s.insert_str(0, "x_");
    }
    s
}

struct Names(BTreeSet<String>);

impl Names {
    fn fresh(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        let mut n = 2;
        while !self.0.insert(name.clone()) {
            name = format!("{base}_{n}");
            n += 1;
        }
        name
    }
}

fn at(machine: &str, kind: StageKind) -> StageRef {
    StageRef::new(MachinePath::new([machine]), kind)
}

/// Translates a table into a static model, regions, events and a behavior.
///
/// Each signal gets an input machine (transfer, receive) fed from outside.
/// Each action gets a machine whose process stage the signal triggers while
/// the `Control.state` flag holds the row's state; the same signal also
/// moves the flag to the next state. States with several outgoing rows get a
/// decision machine, and actions named "Turn On X" latch a flag `X` that the
/// signals leaving the latched state turn off again.
///
/// Regions: one per row (anchored on the action trigger), one per decision
/// state and one per latch release.
pub fn table_to_tm(table: &StateTable) -> TmBundle {
    table_to_tm_with(table, &BTreeMap::new())
}

/// As [`table_to_tm`], grouping actions into machines by `machine_of`
/// (action label to machine name); unmapped actions get their own machine.
pub fn table_to_tm_with(table: &StateTable, machine_of: &BTreeMap<String, String>) -> TmBundle {
    let mut model = StaticModel::new();
    let mut names = Names(BTreeSet::new());
    let states = table.states();
    let multi = states.len() >= 2;

    let control = names.fresh("Control");
    let state_values: BTreeMap<String, String> = {
        let mut vals = Names(BTreeSet::new());
        states.iter().map(|s| (s.to_string(), vals.fresh(&ident(s)))).collect()
    };
    let mut control_m = Machine::new(&control).with_stages(&[StageKind::Process]);
    let state_flag = SlotRef::new(MachinePath::new([control.as_str()]), "state");
    if multi {
        let vals: Vec<&str> = states.iter().map(|s| state_values[*s].as_str()).collect();
        control_m = control_m.with_flag("state", &vals, &state_values[&table.initial]);
    }
    model.add_machine(control_m);
    let in_state = |s: &str| Guard::FlagIs(state_flag.clone(), state_values[s].clone());

    let mut inputs = BTreeMap::new();
    let mut input_machine = BTreeMap::new();
    for sig in table.signals() {
        let m = names.fresh(&format!("In_{}", ident(sig)));
        model.add_machine(Machine::new(&m).with_stages(&[StageKind::Transfer, StageKind::Receive]));
        model.add_flow(at(&m, StageKind::Transfer), at(&m, StageKind::Receive));
        inputs.insert(sig.to_string(), format!("{m}.transfer"));
        input_machine.insert(sig.to_string(), m);
    }
    let input_part = |sig: &str| -> Vec<Element> {
        let m = &input_machine[sig];
        vec![
            Element::stage(at(m, StageKind::Transfer)),
            Element::flow(at(m, StageKind::Transfer), at(m, StageKind::Receive)),
            Element::stage(at(m, StageKind::Receive)),
        ]
    };

    // action machines; a repeated (signal, machine) pair needs a second machine
    let mut action_machines: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut used_pairs: BTreeSet<(String, String)> = BTreeSet::new();
    let mut row_machine = Vec::new();
    for r in &table.rows {
        let group = machine_of.get(&r.action).cloned().unwrap_or_else(|| r.action.clone());
        let list = action_machines.entry(group.clone()).or_default();
        let pick = list.iter().find(|m| !used_pairs.contains(&(r.signal.clone(), (*m).clone()))).cloned();
        let m = match pick {
            Some(m) => m,
            None => {
                let m = names.fresh(&format!("Do_{}", ident(&group)));
                model.add_machine(Machine::new(&m).with_stages(&[StageKind::Process]));
                list.push(m.clone());
                m
            }
        };
        used_pairs.insert((r.signal.clone(), m.clone()));
        row_machine.push(m);
    }

    // latches
    let mut latch_of_row: BTreeMap<usize, SlotRef> = BTreeMap::new();
    let mut latch_machine: Option<String> = None;
    let mut latch_names = Names(BTreeSet::new());
    for (i, r) in table.rows.iter().enumerate() {
        let lower = r.action.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("turn on ") {
            let what = &r.action[r.action.len() - rest.len()..];
            let lm = latch_machine
                .get_or_insert_with(|| {
                    let m = names.fresh("Latch");
                    model.add_machine(Machine::new(&m).with_stages(&[StageKind::Process]));
                    m
                })
                .clone();
            let flag = latch_names.fresh(&ident(what));
            let path = MachinePath::new([lm.as_str()]);
            model.machine_mut(&path).unwrap().flags.insert(
                flag.clone(),
                crate::model::Flag {
                    name: flag.clone(),
                    values: vec!["off".into(), "on".into()],
                    initial: "off".into(),
                },
            );
            latch_of_row.insert(i, SlotRef::new(path, flag));
        }
    }

    let decisions: Vec<&str> =
        states.iter().copied().filter(|s| table.rows.iter().filter(|r| r.state == *s).count() >= 2).collect();
    let mut decision_machine = BTreeMap::new();
    for s in &decisions {
        let m = names.fresh(&format!("D_{}", ident(s)));
        model.add_machine(Machine::new(&m).with_stages(&[StageKind::Process]));
        decision_machine.insert(s.to_string(), m);
    }

    let guard_for = |s: &str| multi.then(|| in_state(s));
    let with_guard = |t: TriggerArc, g: Option<Guard>| match g {
        Some(g) => t.when(g),
        None => t,
    };

    // triggers; state moves sharing endpoints merge their guards
    let mut moves: BTreeMap<TriggerKey, Guard> = BTreeMap::new();
    let mut regions = BTreeMap::new();
    let mut events = BTreeMap::new();
    let mut row_events = Vec::new();
    let mut ids = Names(BTreeSet::new());
    for (i, r) in table.rows.iter().enumerate() {
        let recv = at(&input_machine[&r.signal], StageKind::Receive);
        let act = at(&row_machine[i], StageKind::Process);
        let fire = with_guard(TriggerArc::to_stage(recv.clone(), act.clone()), guard_for(&r.state));
        let mut elems = input_part(&r.signal);
        elems.push(Element::Trigger { arc: fire.key() });
        elems.push(Element::stage(act.clone()));
        model.add_trigger(fire.clone());
        if multi {
            let mv = TriggerArc::assign(recv.clone(), state_flag.clone(), &state_values[&r.next]);
            let g = in_state(&r.state);
            moves.entry(mv.key()).and_modify(|old| *old = old.clone().or(g.clone())).or_insert(g);
            elems.push(Element::Trigger { arc: mv.key() });
            elems.push(Element::flag(state_flag.clone()));
            elems.push(Element::stage(at(&control, StageKind::Process)));
        }
        if let Some(flag) = latch_of_row.get(&i) {
            let on = TriggerArc::assign(act.clone(), flag.clone(), "on");
            elems.push(Element::Trigger { arc: on.key() });
            elems.push(Element::flag(flag.clone()));
            elems.push(Element::stage(StageRef::new(flag.machine.clone(), StageKind::Process)));
            model.add_trigger(on);
        }
        let name = ids.fresh(&format!("row{}", i + 1));
        let ev = format!("E_{name}");
        regions.insert(name.clone(), RegionSpec::new(&name, elems, Element::Trigger { arc: fire.key() }));
        events.insert(ev.clone(), name);
        row_events.push(Some(ev));
    }
    for (key, g) in moves {
        model.add_trigger(TriggerArc { from: key.from, to: key.to, guard: Some(g) });
    }

    let mut decision_events = BTreeMap::new();
    for s in &decisions {
        let d = at(&decision_machine[*s], StageKind::Process);
        let mut elems = vec![Element::stage(d.clone())];
        for r in table.rows.iter().filter(|r| r.state == *s) {
            let recv = at(&input_machine[&r.signal], StageKind::Receive);
            let t = with_guard(TriggerArc::to_stage(recv, d.clone()), guard_for(s));
            elems.push(Element::Trigger { arc: t.key() });
            model.add_trigger(t);
        }
        let name = ids.fresh(&format!("decide_{}", ident(s)));
        let ev = format!("E_{name}");
        regions.insert(name.clone(), RegionSpec::new(&name, elems, Element::stage(d)));
        events.insert(ev.clone(), name);
        decision_events.insert(s.to_string(), ev);
    }

    // a latch is released by any signal that leaves the state it latched into
    let mut release_events: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (&i, flag) in &latch_of_row {
        let held = &table.rows[i].next;
        let leaving: Vec<&Row> = table.rows.iter().filter(|r| &r.state == held && &r.next != held).collect();
        if leaving.is_empty() {
            continue;
        }
        let mut elems =
            vec![Element::flag(flag.clone()), Element::stage(StageRef::new(flag.machine.clone(), StageKind::Process))];
        let mut anchor = None;
        for r in leaving {
            let recv = at(&input_machine[&r.signal], StageKind::Receive);
            let off = with_guard(TriggerArc::assign(recv, flag.clone(), "off"), guard_for(held));
            anchor.get_or_insert(Element::Trigger { arc: off.key() });
            elems.push(Element::Trigger { arc: off.key() });
            model.add_trigger(off);
        }
        let name = ids.fresh(&format!("release_{}", flag.name));
        let ev = format!("E_{name}");
        regions.insert(name.clone(), RegionSpec::new(&name, elems, anchor.unwrap()));
        events.insert(ev.clone(), name);
        release_events.entry(held.clone()).or_default().push(ev);
    }

    // chronology: a row is followed by whatever can happen in its next state
    let mut edges = BTreeSet::new();
    let row_ev = |i: usize| row_events[i].clone().unwrap();
    for (i, r) in table.rows.iter().enumerate() {
        let mut follow: Vec<String> =
            table.rows.iter().enumerate().filter(|(_, q)| q.state == r.next).map(|(j, _)| row_ev(j)).collect();
        if let Some(d) = decision_events.get(&r.next) {
            follow.push(d.clone());
        }
        if let Some(rel) = release_events.get(&r.next) {
            follow.extend(rel.iter().cloned());
        }
        for f in follow {
            edges.insert(EdgeSpec::new(&row_ev(i), &f));
        }
    }
    for (s, d) in &decision_events {
        for (j, _) in table.rows.iter().enumerate().filter(|(_, q)| &q.state == s) {
            edges.insert(EdgeSpec::new(d, &row_ev(j)));
        }
    }
    for (s, rels) in &release_events {
        for rel in rels {
            for (j, _) in table.rows.iter().enumerate().filter(|(_, q)| &q.state == s) {
                edges.insert(EdgeSpec::new(rel, &row_ev(j)));
            }
        }
    }

    // every signal arrives from outside, so every event can open a chronology
    let starts: BTreeSet<String> = events.keys().cloned().collect();
    let behavior = "table".to_string();
    let mut behaviors = BTreeMap::new();
    if !events.is_empty() {
        behaviors.insert(behavior.clone(), BehaviorSpec { name: behavior.clone(), starts, edges });
    }

    TmBundle {
        doc: Document { model, regions, events, behaviors },
        behavior,
        inputs,
        row_events,
        control: multi.then(|| state_flag.to_string()),
        state_values,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivalenceVerdict {
    pub equivalent: bool,
    pub counterexample: Option<Vec<String>>,
    /// Sequences compared.
    #[serde(skip)]
    pub checked: usize,
    #[serde(skip)]
    pub detail: Option<String>,
}

impl EquivalenceVerdict {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("verdict serializes");
        s.push('\n');
        s
    }
}

/// Compares the table with its TM translation on every signal sequence of
/// length 1 to `max_len`, shortest first and in alphabet order within a
/// length. The TM side is simulated one signal per tick; its row events are
/// projected back to `(action, next state)` and must match [`run_table`],
/// including where the table has no row. Traces must also conform to the
/// bundle's behavior.
pub fn check_equivalence(
    table: &StateTable,
    bundle: &TmBundle,
    max_len: usize,
) -> Result<EquivalenceVerdict, TableError> {
    if max_len == 0 {
        return Err(TableError::BadLength);
    }
    let alphabet = table.signals();
    if alphabet.is_empty() {
        return Ok(EquivalenceVerdict { equivalent: true, counterexample: None, checked: 0, detail: None });
    }
    let behavior = bundle.behavior_model().map_err(|e| TableError::Bundle(e.to_string()))?;
    for sig in &alphabet {
        if !bundle.inputs.contains_key(*sig) {
            return Err(TableError::Bundle(format!("no input for signal '{sig}'")));
        }
    }
    let config = SimConfig { max_ticks: max_len as u64 + 1, ..SimConfig::default() };
    let sim = Simulator::new(&bundle.doc.model, &behavior, &config).map_err(|e| TableError::Bundle(e.to_string()))?;
    let row_of: BTreeMap<&str, usize> =
        bundle.row_events.iter().enumerate().filter_map(|(i, e)| e.as_deref().map(|e| (e, i))).collect();

    let mut checked = 0;
    for len in 1..=max_len {
        let total = alphabet.len().pow(len as u32);
        checked += total;
        let found = (0..total).into_par_iter().find_map_first(|mut n| {
            let mut seq = vec![""; len];
            for slot in seq.iter_mut().rev() {
                *slot = alphabet[n % alphabet.len()];
                n /= alphabet.len();
            }
            compare(table, bundle, &sim, &behavior, &row_of, &seq).map(|why| (seq, why))
        });
        if let Some((seq, why)) = found {
            return Ok(EquivalenceVerdict {
                equivalent: false,
                counterexample: Some(seq.iter().map(|s| s.to_string()).collect()),
                checked,
                detail: Some(why),
            });
        }
    }
    Ok(EquivalenceVerdict { equivalent: true, counterexample: None, checked, detail: None })
}

/// Describes the first disagreement on one input sequence, if any.
fn compare(
    table: &StateTable,
    bundle: &TmBundle,
    sim: &Simulator,
    behavior: &BehavioralModel,
    row_of: &BTreeMap<&str, usize>,
    seq: &[&str],
) -> Option<String> {
    let (expect, stop) = match run_table(table, seq) {
        Ok(out) => (out, None),
        Err(TableError::Unhandled { index, .. }) => (run_table(table, &seq[..index]).ok()?, Some(index)),
        Err(e) => return Some(e.to_string()),
    };
    let fed = stop.map_or(seq.len(), |k| k + 1);
    let stimuli: Vec<Stimulus> =
        seq[..fed].iter().enumerate().map(|(t, s)| Stimulus::new(t as u64, &bundle.inputs[*s])).collect();
    let trace = match sim.run(&stimuli) {
        Ok(t) => t,
        Err(e) => return Some(e.to_string()),
    };
    let verdict = check_trace(&trace, behavior);
    if !verdict.conforms {
        return Some(format!("trace does not conform: {}", verdict.violations[0].message));
    }
    let mut got: Vec<Vec<usize>> = vec![Vec::new(); fed];
    for o in &trace.occurrences {
        if let Some(&r) = row_of.get(o.event.as_str()) {
            got[o.at as usize].push(r);
        }
    }
    for (t, rows) in got.iter().enumerate() {
        let want = expect.get(t);
        match (rows.as_slice(), want) {
            ([], None) => {}
            ([r], Some((a, n))) if &table.rows[*r].action == a && &table.rows[*r].next == n => {}
            (rows, want) => {
                let saw: Vec<String> =
                    rows.iter().map(|r| format!("({}, {})", table.rows[*r].action, table.rows[*r].next)).collect();
                return Some(format!(
                    "input {t} '{}': table gives {}, model gives [{}]",
                    seq[t],
                    want.map_or("no row".to_string(), |(a, n)| format!("({a}, {n})")),
                    saw.join(", ")
                ));
            }
        }
    }
    if let Some(flag) = &bundle.control {
        let last = expect.last().map_or(table.initial.as_str(), |(_, n)| n.as_str());
        let want = &bundle.state_values[last];
        if trace.flags.get(flag) != Some(want) {
            return Some(format!("final state flag is {:?}, table ends in {last}", trace.flags.get(flag)));
        }
    }
    None
}
