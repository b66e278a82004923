use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Cause, Chooser, Occurrence, SimConfig, SimError, Stimulus, Trace};
use crate::dynamics::{BehavioralModel, Element};
use crate::model::{FlowArc, Guard, SlotRef, StageKind, StageRef, StaticModel, TriggerTarget};
use crate::validate::{find_stage, validate_static};

/// A thing in flight. `lineage` is the latest occurrence it took part in.
#[derive(Debug, Clone)]
struct Token {
    payload: BTreeMap<String, String>,
    lineage: Cause,
}

struct Run<'a> {
    model: &'a StaticModel,
    anchors: &'a BTreeMap<Element, Vec<String>>,
    flags: BTreeMap<SlotRef, String>,
    levels: BTreeMap<SlotRef, u64>,
    chooser: Chooser,
    occurrences: Vec<Occurrence>,
}

impl Run<'_> {
    fn record(&mut self, el: &Element, tick: u64, cause: Cause) -> Option<Cause> {
        let ids = self.anchors.get(el)?;
        let mut last = None;
        for id in ids {
            self.occurrences.push(Occurrence::new(id, tick, cause));
            last = Some(Cause::Occurrence(self.occurrences.len() - 1));
        }
        last
    }

    fn eval(&mut self, g: &Guard, memo: &mut BTreeMap<String, String>) -> bool {
        match g {
            Guard::FlagIs(f, v) => self.flags.get(f) == Some(v),
            Guard::ChoiceIs(name, v) => {
                if !memo.contains_key(name) {
                    let outcomes = self.model.choices[name].outcomes.clone();
                    let o = self.chooser.choose(name, &outcomes);
                    memo.insert(name.clone(), o);
                }
                &memo[name] == v
            }
            Guard::StorageAtLeast(s, n) => self.levels.get(s).copied().unwrap_or(0) >= *n,
            Guard::StorageBelow(s, n) => self.levels.get(s).copied().unwrap_or(0) < *n,
            Guard::Not(a) => !self.eval(a, memo),
            Guard::And(a, b) => self.eval(a, memo) && self.eval(b, memo),
            Guard::Or(a, b) => self.eval(a, memo) || self.eval(b, memo),
        }
    }

    fn storage_effect(&mut self, stage: &StageRef, token: &Token, tick: u64) {
        let Some(m) = self.model.machine(&stage.machine) else { return };
        let Some(s) = &m.storage else { return };
        let key = SlotRef::new(stage.machine.clone(), s.name.clone());
        let level = self.levels.get(&key).copied().unwrap_or(0);
        let next = match stage.kind {
            StageKind::Receive => {
                let n = token.payload.get("count").and_then(|c| c.parse::<u64>().ok()).unwrap_or(1);
                match s.capacity {
                    crate::model::Capacity::Bounded(cap) => (level + n).min(cap),
                    crate::model::Capacity::Unbounded => level + n,
                }
            }
            StageKind::Release => level.saturating_sub(1),
            _ => return,
        };
        if next != level {
            self.levels.insert(key.clone(), next);
            self.record(&Element::storage(key), tick, token.lineage);
        }
    }

    /// Runs one cascade to quiescence.
    fn cascade(&mut self, start: StageRef, token: Token, tick: u64, limit: usize) -> Result<(), SimError> {
        let mut queue = VecDeque::from([(start, token)]);
        let mut steps = 0usize;
        while let Some((stage, mut token)) = queue.pop_front() {
            steps += 1;
            if steps > limit {
                return Err(SimError::CascadeOverflow { tick, limit });
            }
            if let Some(c) = self.record(&Element::stage(stage.clone()), tick, token.lineage) {
                token.lineage = c;
            }
            self.storage_effect(&stage, &token, tick);

            // guards see the state as it was when the stage activated
            let mut memo = BTreeMap::new();
            let triggers: Vec<_> = self.model.triggers_from(&stage).cloned().collect();
            let enabled: Vec<bool> =
                triggers.iter().map(|t| t.guard.as_ref().is_none_or(|g| self.eval(g, &mut memo))).collect();
            for (t, on) in triggers.iter().zip(enabled) {
                if !on {
                    continue;
                }
                let mut lineage = token.lineage;
                if let Some(c) = self.record(&Element::Trigger { arc: t.key() }, tick, lineage) {
                    lineage = c;
                }
                match &t.to {
                    TriggerTarget::Stage { stage } => {
                        queue.push_back((stage.clone(), Token { payload: token.payload.clone(), lineage }))
                    }
                    TriggerTarget::Assign { flag, value } => {
                        if self.flags.get(flag) != Some(value) {
                            self.flags.insert(flag.clone(), value.clone());
                            self.record(&Element::flag(flag.clone()), tick, lineage);
                        }
                    }
                }
            }

            let flows: Vec<FlowArc> = self.model.flows_from(&stage).cloned().collect();
            for arc in flows {
                let mut t = token.clone();
                if let Some(c) = self.record(&Element::Flow { arc: arc.clone() }, tick, t.lineage) {
                    t.lineage = c;
                }
                queue.push_back((arc.to, t));
            }
        }
        Ok(())
    }
}

/// Executes stimuli against a static model and records an occurrence whenever
/// an event's anchor activates.
///
/// Within a tick, stimuli run one cascade each in file order. A cascade
/// activates the target stage, fires enabled triggers (same tick) and moves the
/// thing one stage per step along every outgoing flow arc.
pub fn simulate(
    model: &StaticModel,
    behavior: &BehavioralModel,
    config: &SimConfig,
    stimuli: &[Stimulus],
) -> Result<Trace, SimError> {
    Simulator::new(model, behavior, config)?.run(stimuli)
}

/// A checked (model, behavior, config) triple that can run many stimulus lists.
pub struct Simulator<'a> {
    model: &'a StaticModel,
    config: &'a SimConfig,
    anchors: BTreeMap<Element, Vec<String>>,
    boundary: BTreeSet<StageRef>,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a StaticModel, behavior: &BehavioralModel, config: &'a SimConfig) -> Result<Self, SimError> {
        config.check()?;
        let report = validate_static(model);
        if report.has_fatal() {
            return Err(SimError::InvalidModel(report.findings[0].to_string()));
        }
        if !behavior.events.is_empty() {
            let anchored = behavior.static_of().map_err(|e| SimError::InvalidModel(e.to_string()))?;
            if anchored.fingerprint() != model.fingerprint() {
                return Err(SimError::InvalidModel("behavior is anchored to a different static model".into()));
            }
        }
        for p in config.script.points() {
            if !model.choices.contains_key(p) {
                return Err(SimError::UnknownChoicePoint(p.to_string()));
            }
        }
        Ok(Simulator { model, config, anchors: behavior.anchors(), boundary: model.boundary_transfers() })
    }

    pub fn run(&self, stimuli: &[Stimulus]) -> Result<Trace, SimError> {
        let model = self.model;
        let config = self.config;
        let mut targets = Vec::with_capacity(stimuli.len());
        for s in stimuli {
            let stage = find_stage(model, &s.target)
                .map_err(|e| SimError::StimulusTargetInvalid(format!("{}: {e}", s.target)))?;
            if !self.boundary.contains(&stage) {
                return Err(SimError::StimulusTargetInvalid(format!("{} is not a boundary transfer stage", s.target)));
            }
            targets.push(stage);
        }

        let mut run = Run {
            model,
            anchors: &self.anchors,
            flags: model
                .flags()
                .into_iter()
                .map(|f| {
                    let init = model.flag(&f).unwrap().initial.clone();
                    (f, init)
                })
                .collect(),
            levels: model
                .storages()
                .into_iter()
                .map(|s| {
                    let l = model.storage(&s).unwrap().level;
                    (s, l)
                })
                .collect(),
            chooser: Chooser::new(config.script.clone(), config.policy, config.seed),
            occurrences: Vec::new(),
        };

        let mut order: Vec<usize> = (0..stimuli.len()).collect();
        order.sort_by_key(|&i| (stimuli[i].at, i));
        for i in order {
            let s = &stimuli[i];
            if s.at >= config.max_ticks {
                continue;
            }
            let token = Token { payload: s.payload.clone(), lineage: Cause::Stimulus(i) };
            run.cascade(targets[i].clone(), token, s.at, config.cascade_limit)?;
        }

        Ok(Trace {
            seed: config.seed,
            occurrences: run.occurrences,
            flags: run.flags.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        })
    }
}
