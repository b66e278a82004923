use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use super::run::Recorder;
use super::{Action, Layout, RailcarError, SafetyKind, World, WorldParams};
use crate::sim::Trace;

#[derive(Debug, Clone)]
pub struct ExploreConfig {
    pub params: WorldParams,
    /// Longest action sequence explored.
    pub depth: usize,
    /// Distinct states allowed before giving up.
    pub state_cap: usize,
    pub parallel: bool,
}

impl ExploreConfig {
    pub fn new(params: WorldParams, depth: usize) -> Self {
        ExploreConfig { params, depth, state_cap: 1_000_000, parallel: true }
    }
}

/// The first breach of one kind and a shortest action sequence showing it.
#[derive(Debug, Clone, Serialize)]
pub struct Finding {
    pub kind: SafetyKind,
    pub depth: usize,
    pub witness: Trace,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExploreReport {
    pub states: usize,
    pub transitions: usize,
    /// Deepest level that produced a new state.
    pub depth_reached: usize,
    /// True when every reachable state was seen within the depth bound.
    pub exhausted: bool,
    pub findings: Vec<Finding>,
}

impl ExploreReport {
    pub fn is_safe(&self) -> bool {
        self.findings.is_empty()
    }
}

struct Node {
    parent: Option<usize>,
    action: Option<Action>,
    world: World,
}

fn actions(layout: &Layout, w: &World) -> Vec<Action> {
    let mut out = Vec::new();
    for c in 0..w.cars.len() {
        for a in [Action::Advance(c), Action::Reserve(c), Action::Enter(c), Action::Park(c), Action::Depart(c)] {
            if w.can(layout, a) {
                out.push(a);
            }
        }
    }
    if let Some(d) = w.next_expiry() {
        out.push(Action::Elapse(d));
    }
    out
}

/// Breadth-first search over the world with cars moving one at a time in
/// any order and time jumping to the next dwell expiry. States are compared
/// without the clock. Every breach kind is reported once, with a witness of
/// minimal length, replayed as a trace.
pub fn explore(config: &ExploreConfig) -> Result<ExploreReport, RailcarError> {
    if config.depth == 0 {
        return Err(RailcarError::BadDepth);
    }
    let layout = Layout::new(&config.params)?;
    let root = World::initial(&layout)?;
    let mut seen: HashSet<World> = HashSet::from([root.clone()]);
    let mut nodes = vec![Node { parent: None, action: None, world: root }];
    let mut frontier = vec![0usize];
    let mut found: BTreeMap<SafetyKind, (usize, usize, Action)> = BTreeMap::new();
    let mut transitions = 0usize;
    let mut depth_reached = 0;

    for level in 1..=config.depth {
        if frontier.is_empty() {
            break;
        }
        let expand = |&i: &usize| -> Vec<(usize, Action, World, Vec<SafetyKind>)> {
            let w = &nodes[i].world;
            actions(&layout, w)
                .into_iter()
                .map(|a| {
                    let mut next = w.clone();
                    let (_, bad) = next.apply(&layout, a);
                    (i, a, next, bad)
                })
                .collect()
        };
        let steps: Vec<_> = if config.parallel {
            frontier.par_iter().map(expand).collect()
        } else {
            frontier.iter().map(expand).collect()
        };
        let mut next = Vec::new();
        for (parent, a, world, bad) in steps.into_iter().flatten() {
            transitions += 1;
            for k in bad {
                found.entry(k).or_insert((level, parent, a));
            }
            if seen.contains(&world) {
                continue;
            }
            if seen.len() >= config.state_cap {
                return Err(RailcarError::StateBudgetExceeded { cap: config.state_cap });
            }
            seen.insert(world.clone());
            nodes.push(Node { parent: Some(parent), action: Some(a), world });
            next.push(nodes.len() - 1);
            depth_reached = level;
        }
        frontier = next;
    }

    let findings = found
        .into_iter()
        .map(|(kind, (depth, parent, last))| {
            let mut path = vec![last];
            let mut at = parent;
            while let (Some(p), Some(a)) = (nodes[at].parent, nodes[at].action) {
                path.push(a);
                at = p;
            }
            path.reverse();
            Finding { kind, depth, witness: replay(&layout, &path) }
        })
        .collect();
    Ok(ExploreReport { states: seen.len(), transitions, depth_reached, exhausted: frontier.is_empty(), findings })
}

fn replay(layout: &Layout, path: &[Action]) -> Trace {
    let mut w = World::initial(layout).expect("layout already checked");
    let mut rec = Recorder::new(layout);
    rec.init_flags(&w);
    let mut now = 0;
    for &a in path {
        if let Action::Elapse(d) = a {
            now += d;
        }
        let (emits, _) = w.apply(layout, a);
        rec.record(&emits, now);
    }
    Trace { seed: 0, occurrences: rec.occurrences, flags: BTreeMap::new() }
}
