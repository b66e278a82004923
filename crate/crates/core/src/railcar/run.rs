use std::collections::BTreeMap;

use super::model::{build_terminal_model, event_id, BEHAVIOR, PARK_OR_CONTINUE, RELEASE};
use super::{Action, AreaKind, Emit, Layout, Link, Mutation, Pos, RailcarError, World, WorldParams};
use crate::dynamics::BehavioralModel;
use crate::sim::{Cause, Chooser, Occurrence, SimConfig, SimError, Trace};

/// The behavioral model every terminal of the world follows.
pub fn terminal_behavior(params: &WorldParams) -> Result<BehavioralModel, RailcarError> {
    let doc = build_terminal_model(params.shape())?;
    doc.behavior(BEHAVIOR).map_err(|e| RailcarError::BadParams(e.to_string()))
}

pub(crate) struct Recorder<'a> {
    layout: &'a Layout,
    pub occurrences: Vec<Occurrence>,
    lineage: Vec<Cause>,
}

impl<'a> Recorder<'a> {
    pub fn new(layout: &'a Layout) -> Self {
        Recorder { layout, occurrences: Vec::new(), lineage: vec![Cause::Init; layout.params.cars] }
    }

    pub fn init_flags(&mut self, world: &World) {
        for (i, a) in self.layout.areas.iter().enumerate() {
            let n = match a.kind {
                AreaKind::T => 5,
                AreaKind::A => 9,
                AreaKind::C => 11,
                AreaKind::B => continue,
            };
            if !world.occupied[i] {
                let mut o = Occurrence::new(&event_id(n), 0, Cause::Init);
                o.area = Some(a.id.clone());
                self.occurrences.push(o);
            }
        }
    }

    pub fn record(&mut self, emits: &[Emit], tick: u64) {
        let base = self.occurrences.len();
        for e in emits {
            let cause = match e.link {
                Link::Car => self.lineage[e.car.expect("car link needs a car")],
                Link::Step(k) => Cause::Occurrence(base + k),
            };
            let mut o = Occurrence::new(&event_id(e.event), tick, cause);
            o.car = e.car.map(|c| self.layout.car_id(c));
            o.area = Some(e.area.clone());
            self.occurrences.push(o);
            if let Some(c) = e.car {
                self.lineage[c] = Cause::Occurrence(self.occurrences.len() - 1);
            }
        }
    }
}

fn final_flags(layout: &Layout, w: &World) -> BTreeMap<String, String> {
    let occ = |b: bool| if b { "occupied" } else { "unoccupied" }.to_string();
    let mut out = BTreeMap::new();
    for (i, a) in layout.areas.iter().enumerate() {
        out.insert(format!("{}.occupied", a.id), occ(w.occupied[i]));
        if a.kind == AreaKind::B {
            let v = if w.approaching[a.terminal] { "set" } else { "reset" };
            out.insert(format!("{}.approaching", a.id), v.to_string());
        }
    }
    let n = layout.params.spots;
    for t in 0..layout.params.terminals {
        for s in 0..n {
            out.insert(format!("{}.occupied", layout.spot_id(t, s)), occ(w.spot_taken[t * n + s]));
        }
    }
    out
}

/// Runs the ring of terminals tick by tick for `config.max_ticks` ticks.
///
/// Each tick has fixed phases: dwell timers; line moves, repeated until
/// nothing moves so a car may follow another into the area it just left
/// (cars in id order, each at most one move per tick; a car in B reserves
/// and enters T in one move); parking; departures from parking. A car
/// decides between continuing and parking once its dwell is over; a parked
/// car is asked whether to leave whenever it could. Cars that reached their
/// area this tick do not move again until the next one.
pub fn run_world(params: &WorldParams, config: &SimConfig) -> Result<Trace, RailcarError> {
    config.check()?;
    for p in config.script.points() {
        if p != PARK_OR_CONTINUE && p != RELEASE {
            return Err(SimError::UnknownChoicePoint(p.to_string()).into());
        }
    }
    let layout = Layout::new(params)?;
    let mut world = World::initial(&layout)?;
    let mut rec = Recorder::new(&layout);
    let mut chooser = Chooser::new(config.script.clone(), config.policy, config.seed);
    let park_outcomes = vec!["continue".to_string(), "park".to_string()];
    let release_outcomes = vec!["release".to_string(), "hold".to_string()];
    let no_dwell = params.mutation == Some(Mutation::NoDwell);
    let n = params.cars;
    // None: undecided; Some(true): park
    let mut intent: Vec<Option<bool>> = vec![None; n];
    let mut parked_at: Vec<Option<u64>> = vec![None; n];

    rec.init_flags(&world);
    for tick in 0..config.max_ticks {
        if tick > 0 && world.next_expiry().is_some() {
            let (emits, _) = world.apply(&layout, Action::Elapse(1));
            rec.record(&emits, tick);
        }
        let mut moved = vec![false; n];
        let mut decide = |c: usize, world: &World, intent: &mut Vec<Option<bool>>| {
            if intent[c].is_none() && (world.cars[c].dwell_left == 0 || no_dwell) {
                let Pos::Area(i) = world.cars[c].pos else { unreachable!() };
                let park = params.spots > 0
                    && chooser.choose(PARK_OR_CONTINUE, &park_outcomes) == "park"
                    && world.free_spot(&layout, layout.areas[i].terminal).is_some();
                intent[c] = Some(park);
            }
        };

        loop {
            let mut progress = false;
            for c in 0..n {
                if moved[c] {
                    continue;
                }
                let Pos::Area(i) = world.cars[c].pos else { continue };
                let acts: &[Action] = match layout.areas[i].kind {
                    AreaKind::T => {
                        decide(c, &world, &mut intent);
                        if intent[c] == Some(false) {
                            &[Action::Advance(c)]
                        } else {
                            &[]
                        }
                    }
                    AreaKind::A | AreaKind::C => &[Action::Advance(c)],
                    AreaKind::B => &[Action::Reserve(c), Action::Enter(c)],
                };
                if acts.first().is_some_and(|&a| world.can(&layout, a)) {
                    for &a in acts {
                        let (emits, _) = world.apply(&layout, a);
                        rec.record(&emits, tick);
                    }
                    if layout.areas[i].kind == AreaKind::T {
                        intent[c] = None;
                    }
                    moved[c] = true;
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }

        for c in 0..n {
            let Pos::Area(i) = world.cars[c].pos else { continue };
            if moved[c] || layout.areas[i].kind != AreaKind::T {
                continue;
            }
            decide(c, &world, &mut intent);
            if intent[c] == Some(true) && world.can(&layout, Action::Park(c)) {
                let (emits, _) = world.apply(&layout, Action::Park(c));
                rec.record(&emits, tick);
                intent[c] = None;
                parked_at[c] = Some(tick);
                moved[c] = true;
            }
        }

        let mut parked: Vec<usize> = (0..n)
            .filter(|&c| matches!(world.cars[c].pos, Pos::Spot(..)) && !moved[c])
            .filter(|&c| parked_at[c].is_none_or(|t| t < tick))
            .collect();
        parked.sort_by_key(|&c| world.cars[c].pos);
        for c in parked {
            if world.can(&layout, Action::Depart(c)) && chooser.choose(RELEASE, &release_outcomes) == "release" {
                let (emits, _) = world.apply(&layout, Action::Depart(c));
                rec.record(&emits, tick);
                parked_at[c] = None;
            }
        }
    }

    Ok(Trace { seed: config.seed, occurrences: rec.occurrences, flags: final_flags(&layout, &world) })
}
