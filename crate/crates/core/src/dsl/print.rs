use std::fmt::Write;

use super::Document;
use crate::dynamics::{DelayBounds, Element};
use crate::model::{Capacity, Guard, Machine, TriggerTarget};

/// Canonical text: declarations grouped by kind and sorted by name, two-space
/// indentation, one statement per line, LF endings.
pub fn serialize(doc: &Document) -> String {
    let mut out = String::new();
    for m in doc.model.machines.values() {
        machine(&mut out, m, 0);
    }
    for c in doc.model.choices.values() {
        let _ = writeln!(out, "choice {} {{ {} }}", c.name, c.outcomes.join(", "));
    }
    for f in &doc.model.flows {
        let _ = writeln!(out, "flow {} -> {}", f.from, f.to);
    }
    for t in &doc.model.triggers {
        let _ = write!(out, "trigger {} -> {}", t.from, target(&t.to));
        if let Some(g) = &t.guard {
            let _ = write!(out, " when {}", guard(g));
        }
        out.push('\n');
    }
    for r in doc.regions.values() {
        let _ = writeln!(out, "region {} {{", r.name);
        let n = r.elements.len();
        for (i, e) in r.elements.iter().enumerate() {
            let sep = if i + 1 < n { "," } else { "" };
            let _ = writeln!(out, "  {}{sep}", element(e));
        }
        let _ = writeln!(out, "  anchor {}", element(&r.anchor));
        out.push_str("}\n");
    }
    for (id, region) in &doc.events {
        let _ = writeln!(out, "event {id} on {region}");
    }
    for b in doc.behaviors.values() {
        let _ = writeln!(out, "behavior {} {{", b.name);
        for s in &b.starts {
            let _ = writeln!(out, "  start {s}");
        }
        for e in &b.edges {
            let _ = write!(out, "  {} -> {}", e.from, e.to);
            if e.delay != DelayBounds::ANY {
                let _ = write!(out, " delay {}", e.delay);
            }
            out.push('\n');
        }
        out.push_str("}\n");
    }
    out
}

fn machine(out: &mut String, m: &Machine, depth: usize) {
    let pad = "  ".repeat(depth);
    let _ = writeln!(out, "{pad}machine {} {{", m.name);
    if !m.stages.is_empty() {
        let kinds: Vec<&str> = m.stages.iter().map(|k| k.as_str()).collect();
        let _ = writeln!(out, "{pad}  stages: {}", kinds.join(", "));
    }
    for f in m.flags.values() {
        let _ = writeln!(out, "{pad}  flag {} {{ {}, init {} }}", f.name, f.values.join(", "), f.initial);
    }
    if let Some(s) = &m.storage {
        let cap = match s.capacity {
            Capacity::Bounded(c) => c.to_string(),
            Capacity::Unbounded => "inf".to_string(),
        };
        let _ = write!(out, "{pad}  storage {} cap {cap}", s.name);
        if s.level != 0 {
            let _ = write!(out, " level {}", s.level);
        }
        out.push('\n');
    }
    for sub in m.submachines.values() {
        machine(out, sub, depth + 1);
    }
    let _ = writeln!(out, "{pad}}}");
}

fn target(t: &TriggerTarget) -> String {
    t.to_string()
}

fn element(e: &Element) -> String {
    match e {
        Element::Stage { stage } => stage.to_string(),
        Element::Flow { arc } => format!("flow {} -> {}", arc.from, arc.to),
        Element::Trigger { arc } => format!("trigger {} -> {}", arc.from, target(&arc.to)),
        Element::Flag { flag } => format!("flag {flag}"),
        Element::Storage { storage } => format!("storage {storage}"),
    }
}

fn prec(g: &Guard) -> u8 {
    match g {
        Guard::Or(..) => 0,
        Guard::And(..) => 1,
        _ => 2,
    }
}

/// Prints with the minimum parentheses that reparse to the same tree; both
/// binary operators associate to the left.
pub(crate) fn guard(g: &Guard) -> String {
    let wrap = |child: &Guard, min: u8| {
        let s = guard(child);
        if prec(child) < min {
            format!("({s})")
        } else {
            s
        }
    };
    match g {
        Guard::FlagIs(f, v) => format!("{f} == {v}"),
        Guard::ChoiceIs(c, v) => format!("{c} == {v}"),
        Guard::StorageAtLeast(s, n) => format!("{s} >= {n}"),
        Guard::StorageBelow(s, n) => format!("{s} < {n}"),
        Guard::Not(a) => format!("not {}", wrap(a, 2)),
        Guard::And(a, b) => format!("{} and {}", wrap(a, 1), wrap(b, 2)),
        Guard::Or(a, b) => format!("{} or {}", wrap(a, 0), wrap(b, 1)),
    }
}
