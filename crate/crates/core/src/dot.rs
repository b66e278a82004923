//! Graphviz rendering of static models.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::dsl::print::guard;
use crate::dynamics::{Element, RegionSpec};
use crate::model::{Machine, MachinePath, SlotRef, StageRef, StaticModel, TriggerTarget};

const PALETTE: [&str; 12] = [
    "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd",
    "#ccebc5", "#ffed6f",
];

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn stage_id(s: &StageRef) -> String {
    quote(&s.to_string())
}

fn slot_id(s: &SlotRef) -> String {
    quote(&format!("{s}#slot"))
}

/// Renders a model as a DOT digraph: machines are clusters, stages are boxes
/// labeled with their kind, flags and storage are ellipses, flow arcs are
/// solid and trigger arcs dashed. With `regions`, elements are colored by the
/// first region (in name order) that holds them.
pub fn to_dot(model: &StaticModel, regions: Option<&BTreeMap<String, RegionSpec>>) -> String {
    let mut color: BTreeMap<Element, &str> = BTreeMap::new();
    let mut out = String::from("digraph tm {\n");
    if let Some(regions) = regions {
        for (i, (name, r)) in regions.iter().enumerate() {
            let c = PALETTE[i % PALETTE.len()];
            writeln!(out, "  // region {name} {c}").unwrap();
            for e in &r.elements {
                color.entry(e.clone()).or_insert(c);
            }
        }
    }
    if model.machines.is_empty() {
        out.push_str("}\n");
        return out;
    }
    out.push_str("  compound=true;\n  node [shape=box, fontsize=10];\n");
    for m in model.machines.values() {
        cluster(&mut out, m, &MachinePath(Vec::new()), &color, 1);
    }
    for f in &model.flows {
        write!(out, "  {} -> {}", stage_id(&f.from), stage_id(&f.to)).unwrap();
        match color.get(&Element::Flow { arc: f.clone() }) {
            Some(c) => writeln!(out, " [color={}, penwidth=2];", quote(c)).unwrap(),
            None => out.push_str(";\n"),
        }
    }
    for t in &model.triggers {
        let (to, mut label) = match &t.to {
            TriggerTarget::Stage { stage } => (stage_id(stage), String::new()),
            TriggerTarget::Assign { flag, value } => (slot_id(flag), format!("= {value}")),
        };
        if let Some(g) = &t.guard {
            if !label.is_empty() {
                label.push(' ');
            }
            write!(label, "when {}", guard(g)).unwrap();
        }
        let mut attrs = vec!["style=dashed".to_string()];
        if !label.is_empty() {
            attrs.push(format!("label={}", quote(&label)));
        }
        if let Some(c) = color.get(&Element::Trigger { arc: t.key() }) {
            attrs.push(format!("color={}, penwidth=2", quote(c)));
        }
        writeln!(out, "  {} -> {to} [{}];", stage_id(&t.from), attrs.join(", ")).unwrap();
    }
    out.push_str("}\n");
    out
}

fn fill(color: &BTreeMap<Element, &str>, e: &Element) -> String {
    match color.get(e) {
        Some(c) => format!(", style=filled, fillcolor={}", quote(c)),
        None => String::new(),
    }
}

fn cluster(out: &mut String, m: &Machine, parent: &MachinePath, color: &BTreeMap<Element, &str>, depth: usize) {
    let path = parent.child(&m.name);
    let pad = "  ".repeat(depth);
    writeln!(out, "{pad}subgraph {} {{", quote(&format!("cluster_{path}"))).unwrap();
    writeln!(out, "{pad}  label={};", quote(&m.name)).unwrap();
    for k in &m.stages {
        let s = StageRef::new(path.clone(), *k);
        let f = fill(color, &Element::stage(s.clone()));
        writeln!(out, "{pad}  {} [label={}{f}];", stage_id(&s), quote(k.as_str())).unwrap();
    }
    for flag in m.flags.values() {
        let s = SlotRef::new(path.clone(), flag.name.clone());
        let f = fill(color, &Element::flag(s.clone()));
        let label = format!("{}: {}", flag.name, flag.values.join(" | "));
        writeln!(out, "{pad}  {} [shape=ellipse, label={}{f}];", slot_id(&s), quote(&label)).unwrap();
    }
    if let Some(st) = &m.storage {
        let s = SlotRef::new(path.clone(), st.name.clone());
        let f = fill(color, &Element::storage(s.clone()));
        writeln!(out, "{pad}  {} [shape=cylinder, label={}{f}];", slot_id(&s), quote(&st.name)).unwrap();
    }
    for sub in m.submachines.values() {
        cluster(out, sub, &path, color, depth + 1);
    }
    writeln!(out, "{pad}}}").unwrap();
}
