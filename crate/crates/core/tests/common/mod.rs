//! Random documents for round-trip tests.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tm_core::dsl::Document;
use tm_core::dynamics::{BehaviorSpec, DelayBounds, EdgeSpec, Element, RegionSpec};
use tm_core::model::{Capacity, Guard, Machine, SlotRef, StageKind, StageRef, StaticModel, TriggerArc, TriggerTarget};

struct Gen {
    rng: ChaCha8Rng,
    next: usize,
}

impl Gen {
    fn name(&mut self, prefix: &str) -> String {
        self.next += 1;
        if self.rng.gen_bool(0.2) {
            format!("{prefix}-x{}", self.next)
        } else {
            format!("{prefix}{}", self.next)
        }
    }

    fn machine(&mut self, depth: usize) -> Machine {
        let mut m = Machine::new(self.name("M"));
        let kinds: Vec<StageKind> = StageKind::ALL.iter().copied().filter(|_| self.rng.gen_bool(0.6)).collect();
        m = m.with_stages(&kinds);
        for _ in 0..self.rng.gen_range(0..3) {
            let n = self.rng.gen_range(1..4);
            let values: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
            let init = values.choose(&mut self.rng).unwrap().clone();
            let refs: Vec<&str> = values.iter().map(String::as_str).collect();
            let name = self.name("f");
            m = m.with_flag(&name, &refs, &init);
        }
        if self.rng.gen_bool(0.3) {
            let cap =
                if self.rng.gen_bool(0.3) { Capacity::Unbounded } else { Capacity::Bounded(self.rng.gen_range(1..50)) };
            let level = match cap {
                Capacity::Bounded(c) => self.rng.gen_range(0..=c),
                Capacity::Unbounded => self.rng.gen_range(0..10),
            };
            let name = self.name("s");
            m = m.with_storage(&name, cap, level);
        }
        if depth < 2 {
            for _ in 0..self.rng.gen_range(0..3) {
                let sub = self.machine(depth + 1);
                m = m.with_submachine(sub);
            }
        }
        m
    }

    fn guard(
        &mut self,
        flags: &[(SlotRef, Vec<String>)],
        stores: &[SlotRef],
        choices: &[(String, Vec<String>)],
        depth: usize,
    ) -> Guard {
        let leaf = depth >= 3 || self.rng.gen_bool(0.5);
        if !leaf {
            return match self.rng.gen_range(0..3) {
                0 => self.guard(flags, stores, choices, depth + 1).not(),
                1 => self.guard(flags, stores, choices, depth + 1).and(self.guard(flags, stores, choices, depth + 1)),
                _ => self.guard(flags, stores, choices, depth + 1).or(self.guard(flags, stores, choices, depth + 1)),
            };
        }
        loop {
            match self.rng.gen_range(0..4) {
                0 if !flags.is_empty() => {
                    let (f, vs) = flags.choose(&mut self.rng).unwrap();
                    return Guard::FlagIs(f.clone(), vs.choose(&mut self.rng).unwrap().clone());
                }
                1 if !choices.is_empty() => {
                    let (c, os) = choices.choose(&mut self.rng).unwrap();
                    return Guard::ChoiceIs(c.clone(), os.choose(&mut self.rng).unwrap().clone());
                }
                2 if !stores.is_empty() => {
                    return Guard::StorageAtLeast(
                        stores.choose(&mut self.rng).unwrap().clone(),
                        self.rng.gen_range(0..9),
                    )
                }
                3 if !stores.is_empty() => {
                    return Guard::StorageBelow(stores.choose(&mut self.rng).unwrap().clone(), self.rng.gen_range(0..9))
                }
                _ if flags.is_empty() && choices.is_empty() && stores.is_empty() => unreachable!(),
                _ => {}
            }
        }
    }
}

/// A structurally resolvable document drawn from `seed`: nested machines,
/// flags, storage, choices, flows, guarded triggers, regions, events and
/// behaviors with delay bounds.
pub fn random_document(seed: u64) -> Document {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), next: 0 };
    let mut model = StaticModel::new();
    for _ in 0..g.rng.gen_range(1..4) {
        let m = g.machine(0);
        model.add_machine(m);
    }
    let mut choices = Vec::new();
    for _ in 0..g.rng.gen_range(0..3) {
        let name = g.name("c");
        let outs: Vec<String> = (0..g.rng.gen_range(1..4)).map(|i| format!("o{i}")).collect();
        let refs: Vec<&str> = outs.iter().map(String::as_str).collect();
        model.add_choice(&name, &refs);
        choices.push((name, outs));
    }

    let stages: Vec<StageRef> = model.stages();
    let flags: Vec<(SlotRef, Vec<String>)> = model
        .flags()
        .into_iter()
        .map(|f| {
            let vs = model.flag(&f).unwrap().values.clone();
            (f, vs)
        })
        .collect();
    let stores = model.storages();

    if !stages.is_empty() {
        for _ in 0..g.rng.gen_range(0..6) {
            let a = stages.choose(&mut g.rng).unwrap().clone();
            let b = stages.choose(&mut g.rng).unwrap().clone();
            model.add_flow(a, b);
        }
        for _ in 0..g.rng.gen_range(0..6) {
            let from = stages.choose(&mut g.rng).unwrap().clone();
            let to = if !flags.is_empty() && g.rng.gen_bool(0.4) {
                let (f, vs) = flags.choose(&mut g.rng).unwrap();
                TriggerTarget::Assign { flag: f.clone(), value: vs.choose(&mut g.rng).unwrap().clone() }
            } else {
                TriggerTarget::Stage { stage: stages.choose(&mut g.rng).unwrap().clone() }
            };
            let mut t = TriggerArc::new(from, to);
            let has_atoms = !flags.is_empty() || !stores.is_empty() || !choices.is_empty();
            if has_atoms && g.rng.gen_bool(0.6) {
                t = t.when(g.guard(&flags, &stores, &choices, 0));
            }
            model.add_trigger(t);
        }
    }

    let mut pool: Vec<Element> = stages.iter().cloned().map(Element::stage).collect();
    pool.extend(model.flows.iter().map(|f| Element::flow(f.from.clone(), f.to.clone())));
    pool.extend(model.triggers.iter().map(|t| Element::trigger(t.from.clone(), t.to.clone())));
    pool.extend(flags.iter().map(|(f, _)| Element::flag(f.clone())));
    pool.extend(stores.iter().cloned().map(Element::storage));

    let mut doc = Document { model, ..Default::default() };
    if pool.is_empty() {
        return doc;
    }
    for _ in 0..g.rng.gen_range(0..4) {
        let name = g.name("R");
        let want = g.rng.gen_range(1..=5);
        let mut els = vec![pool.choose(&mut g.rng).unwrap().clone()];
        for _ in 1..want {
            let at = els.choose(&mut g.rng).unwrap().clone();
            let near: Vec<Element> = pool.iter().filter(|e| linked(&at, e)).cloned().collect();
            if let Some(e) = near.choose(&mut g.rng) {
                if !els.contains(e) {
                    els.push(e.clone());
                }
            }
        }
        let anchor = els.choose(&mut g.rng).unwrap().clone();
        doc.regions.insert(name.clone(), RegionSpec::new(&name, els, anchor));
    }
    let regions: Vec<String> = doc.regions.keys().cloned().collect();
    for r in &regions {
        for _ in 0..g.rng.gen_range(1..3) {
            let id = g.name("E");
            doc.events.insert(id, r.clone());
        }
    }
    let events: Vec<String> = doc.events.keys().cloned().collect();
    if events.is_empty() {
        return doc;
    }
    for _ in 0..g.rng.gen_range(0..3) {
        let name = g.name("b");
        let mut spec = BehaviorSpec { name: name.clone(), starts: Default::default(), edges: Default::default() };
        for _ in 0..g.rng.gen_range(0..3) {
            spec.starts.insert(events.choose(&mut g.rng).unwrap().clone());
        }
        for _ in 0..g.rng.gen_range(0..5) {
            let a = events.choose(&mut g.rng).unwrap();
            let b = events.choose(&mut g.rng).unwrap();
            let mut e = EdgeSpec::new(a, b);
            if g.rng.gen_bool(0.5) {
                let min = g.rng.gen_range(0..100);
                let max = g.rng.gen_bool(0.7).then(|| min + g.rng.gen_range(0..100));
                e.delay = DelayBounds { min, max };
            }
            if !spec.edges.iter().any(|x| x.from == e.from && x.to == e.to) {
                spec.edges.insert(e);
            }
        }
        doc.behaviors.insert(name, spec);
    }
    doc
}

fn machine_of(e: &Element) -> Option<&tm_core::model::MachinePath> {
    match e {
        Element::Stage { stage } => Some(&stage.machine),
        Element::Flag { flag } => Some(&flag.machine),
        Element::Storage { storage } => Some(&storage.machine),
        _ => None,
    }
}

/// A conservative adjacency: every pair it reports is connected in the
/// static graph.
fn linked(a: &Element, b: &Element) -> bool {
    let on = |arc_stages: &[&StageRef], s: &StageRef| arc_stages.contains(&s);
    match (a, b) {
        (Element::Flow { arc }, Element::Stage { stage }) | (Element::Stage { stage }, Element::Flow { arc }) => {
            on(&[&arc.from, &arc.to], stage)
        }
        (Element::Trigger { arc }, Element::Stage { stage }) | (Element::Stage { stage }, Element::Trigger { arc }) => {
            &arc.from == stage || matches!(&arc.to, TriggerTarget::Stage { stage: s } if s == stage)
        }
        (Element::Trigger { arc }, Element::Flag { flag }) | (Element::Flag { flag }, Element::Trigger { arc }) => {
            matches!(&arc.to, TriggerTarget::Assign { flag: f, .. } if f == flag)
        }
        (Element::Stage { .. }, Element::Flag { .. } | Element::Storage { .. })
        | (Element::Flag { .. } | Element::Storage { .. }, Element::Stage { .. }) => machine_of(a) == machine_of(b),
        _ => false,
    }
}
