//! The railcar terminal: its static model and behavior, a ring-of-terminals
//! world simulator, trace safety checks and a bounded state-space explorer.

mod explore;
mod model;
mod run;
mod safety;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

pub use explore::{explore, ExploreConfig, ExploreReport, Finding};
pub use model::{
    behavior_spec, build_terminal_model, event_id, layout, mirror, mirror_isomorphism, mirror_layout, mirror_name,
    TerminalShape, BEHAVIOR, EVENT_TEXT, PARK_OR_CONTINUE, RELEASE,
};
pub use run::{run_world, terminal_behavior};
pub use safety::{check_safety, SafetyKind, SafetyViolation};

/// Ticks a railcar stays in T before it may leave.
pub const DWELL: u64 = 90;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RailcarError {
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("state budget of {cap} exceeded")]
    StateBudgetExceeded { cap: usize },
    #[error("exploration depth must be at least 1")]
    BadDepth,
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}

impl RailcarError {
    pub fn code(&self) -> &'static str {
        match self {
            RailcarError::BadParams(_) => "BAD_PARAMS",
            RailcarError::StateBudgetExceeded { .. } => "STATE_BUDGET_EXCEEDED",
            RailcarError::BadDepth => "BAD_DEPTH",
            RailcarError::Sim(e) => e.code(),
        }
    }
}

/// Deliberate defects for checking that the safety checks bite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    /// Leaving B does not mark T occupied.
    NoReservation,
    /// Parked cars ignore the approaching flag.
    NoApproachingBlock,
    /// Cars may leave T before the dwell time is up.
    NoDwell,
    /// Line moves ignore the occupied flag of the next area.
    NoHandshake,
}

impl Mutation {
    pub const ALL: [Mutation; 4] =
        [Mutation::NoReservation, Mutation::NoApproachingBlock, Mutation::NoDwell, Mutation::NoHandshake];

    pub fn as_str(self) -> &'static str {
        match self {
            Mutation::NoReservation => "no-reservation",
            Mutation::NoApproachingBlock => "no-approaching-block",
            Mutation::NoDwell => "no-dwell",
            Mutation::NoHandshake => "no-handshake",
        }
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mutation {
    type Err = RailcarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mutation::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| RailcarError::BadParams(format!("unknown mutation '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldParams {
    pub terminals: usize,
    /// Areas from one terminal to the next: A, then C areas, then B.
    pub segments: usize,
    /// Parking spots per terminal.
    pub spots: usize,
    pub cars: usize,
    /// Initial area or spot per car; by default cars fill C areas, then
    /// parking spots, then A areas.
    pub positions: Option<Vec<String>>,
    pub mutation: Option<Mutation>,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams { terminals: 6, segments: 3, spots: 2, cars: 1, positions: None, mutation: None }
    }
}

impl WorldParams {
    pub fn shape(&self) -> TerminalShape {
        TerminalShape { segments: self.segments, spots: self.spots }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AreaKind {
    T,
    A,
    C,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Area {
    pub id: String,
    pub kind: AreaKind,
    /// Terminal this area belongs to; a B belongs to the terminal it feeds.
    pub terminal: usize,
}

/// The ring: for each terminal `t` (1-based in ids) the areas `Tt`, `At`,
/// `Ct.1`.., then `B(t+1)` in travel order. Parking spots are `Pt.s`.
#[derive(Debug, Clone)]
pub struct Layout {
    pub params: WorldParams,
    pub areas: Vec<Area>,
    t_area: Vec<usize>,
    b_area: Vec<usize>,
}

impl Layout {
    pub fn new(params: &WorldParams) -> Result<Layout, RailcarError> {
        if params.terminals == 0 {
            return Err(RailcarError::BadParams("need at least one terminal".into()));
        }
        if params.segments < 2 {
            return Err(RailcarError::BadParams(format!("segments must be at least 2, got {}", params.segments)));
        }
        let n = params.terminals;
        let mut areas = Vec::new();
        let mut t_area = Vec::with_capacity(n);
        let mut b_area = vec![0; n];
        for t in 0..n {
            t_area.push(areas.len());
            areas.push(Area { id: format!("T{}", t + 1), kind: AreaKind::T, terminal: t });
            areas.push(Area { id: format!("A{}", t + 1), kind: AreaKind::A, terminal: t });
            for j in 1..=params.segments - 2 {
                areas.push(Area { id: format!("C{}.{j}", t + 1), kind: AreaKind::C, terminal: t });
            }
            let nt = (t + 1) % n;
            b_area[nt] = areas.len();
            areas.push(Area { id: format!("B{}", nt + 1), kind: AreaKind::B, terminal: nt });
        }
        let layout = Layout { params: params.clone(), areas, t_area, b_area };
        layout.initial_positions()?;
        Ok(layout)
    }

    pub fn next(&self, i: usize) -> usize {
        (i + 1) % self.areas.len()
    }

    pub fn t_of(&self, terminal: usize) -> usize {
        self.t_area[terminal]
    }

    pub fn b_of(&self, terminal: usize) -> usize {
        self.b_area[terminal]
    }

    pub fn spot_id(&self, terminal: usize, spot: usize) -> String {
        format!("P{}.{}", terminal + 1, spot + 1)
    }

    pub fn car_id(&self, car: usize) -> String {
        format!("car{}", car + 1)
    }

    pub fn find(&self, id: &str) -> Option<Pos> {
        if let Some(i) = self.areas.iter().position(|a| a.id == id) {
            return Some(Pos::Area(i));
        }
        (0..self.params.terminals)
            .flat_map(|t| (0..self.params.spots).map(move |s| (t, s)))
            .find(|&(t, s)| self.spot_id(t, s) == id)
            .map(|(t, s)| Pos::Spot(t, s))
    }

    pub fn pos_id(&self, p: Pos) -> String {
        match p {
            Pos::Area(i) => self.areas[i].id.clone(),
            Pos::Transit(t) => self.areas[self.t_area[t]].id.clone(),
            Pos::Spot(t, s) => self.spot_id(t, s),
        }
    }

    pub fn initial_positions(&self) -> Result<Vec<Pos>, RailcarError> {
        let p = &self.params;
        let out: Vec<Pos> = match &p.positions {
            Some(ids) => {
                if ids.len() != p.cars {
                    return Err(RailcarError::BadParams(format!("{} positions given for {} cars", ids.len(), p.cars)));
                }
                let mut out = Vec::new();
                for id in ids {
                    let pos = self.find(id).ok_or_else(|| RailcarError::BadParams(format!("unknown area '{id}'")))?;
                    if let Pos::Area(i) = pos {
                        if matches!(self.areas[i].kind, AreaKind::T | AreaKind::B) {
                            return Err(RailcarError::BadParams(format!("cars cannot start in {id}")));
                        }
                    }
                    if out.contains(&pos) {
                        return Err(RailcarError::BadParams(format!("two cars start in {id}")));
                    }
                    out.push(pos);
                }
                out
            }
            None => {
                let by_kind = |k: AreaKind| {
                    self.areas.iter().enumerate().filter(move |(_, a)| a.kind == k).map(|(i, _)| Pos::Area(i))
                };
                let spots = (0..p.terminals).flat_map(|t| (0..p.spots).map(move |s| Pos::Spot(t, s)));
                let all: Vec<Pos> = by_kind(AreaKind::C).chain(spots).chain(by_kind(AreaKind::A)).collect();
                if all.len() < p.cars {
                    return Err(RailcarError::BadParams(format!(
                        "{} cars do not fit in {} starting places",
                        p.cars,
                        all.len()
                    )));
                }
                all[..p.cars].to_vec()
            }
        };
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    Area(usize),
    /// Left B, not yet in the terminal's T.
    Transit(usize),
    Spot(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Car {
    pub pos: Pos,
    /// Ticks of dwell left while in T.
    pub dwell_left: u64,
}

/// Everything that determines the future of the world, minus the clock.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct World {
    pub cars: Vec<Car>,
    pub occupied: Vec<bool>,
    pub spot_taken: Vec<bool>,
    pub approaching: Vec<bool>,
    pub reserved: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Action {
    /// Move to the next area along the ring: T to A, A onward, C onward.
    Advance(usize),
    /// Reserve T and leave B.
    Reserve(usize),
    /// Arrive in T after reserving.
    Enter(usize),
    Park(usize),
    Depart(usize),
    Elapse(u64),
}

/// How an emitted occurrence finds its cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Link {
    /// The car's latest occurrence.
    Car,
    /// An earlier occurrence of the same step.
    Step(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Emit {
    pub event: usize,
    pub car: Option<usize>,
    pub area: String,
    pub link: Link,
}

impl World {
    pub fn initial(layout: &Layout) -> Result<World, RailcarError> {
        let p = &layout.params;
        let mut w = World {
            cars: Vec::new(),
            occupied: vec![false; layout.areas.len()],
            spot_taken: vec![false; p.terminals * p.spots],
            approaching: vec![false; p.terminals],
            reserved: vec![None; p.terminals],
        };
        for pos in layout.initial_positions()? {
            match pos {
                Pos::Area(i) => w.occupied[i] = true,
                Pos::Spot(t, s) => w.spot_taken[t * p.spots + s] = true,
                Pos::Transit(_) => unreachable!(),
            }
            w.cars.push(Car { pos, dwell_left: 0 });
        }
        Ok(w)
    }

    fn mutated(layout: &Layout, m: Mutation) -> bool {
        layout.params.mutation == Some(m)
    }

    pub fn can(&self, layout: &Layout, a: Action) -> bool {
        let handshake = !World::mutated(layout, Mutation::NoHandshake);
        let dwell = !World::mutated(layout, Mutation::NoDwell);
        match a {
            Action::Advance(c) => match self.cars[c].pos {
                Pos::Area(i) => {
                    let free = !handshake || !self.occupied[layout.next(i)];
                    match layout.areas[i].kind {
                        AreaKind::T => free && (!dwell || self.cars[c].dwell_left == 0),
                        AreaKind::A | AreaKind::C => free,
                        AreaKind::B => false,
                    }
                }
                _ => false,
            },
            Action::Reserve(c) => match self.cars[c].pos {
                Pos::Area(i) if layout.areas[i].kind == AreaKind::B => {
                    !self.occupied[layout.t_of(layout.areas[i].terminal)]
                }
                _ => false,
            },
            Action::Enter(c) => matches!(self.cars[c].pos, Pos::Transit(_)),
            Action::Park(c) => match self.cars[c].pos {
                Pos::Area(i) if layout.areas[i].kind == AreaKind::T => {
                    (!dwell || self.cars[c].dwell_left == 0)
                        && self.free_spot(layout, layout.areas[i].terminal).is_some()
                }
                _ => false,
            },
            Action::Depart(c) => match self.cars[c].pos {
                Pos::Spot(t, _) => {
                    !self.occupied[layout.t_of(t)]
                        && (World::mutated(layout, Mutation::NoApproachingBlock) || !self.approaching[t])
                }
                _ => false,
            },
            Action::Elapse(d) => d > 0 && self.next_expiry().is_some_and(|e| d <= e),
        }
    }

    pub fn free_spot(&self, layout: &Layout, t: usize) -> Option<usize> {
        let n = layout.params.spots;
        (0..n).find(|s| !self.spot_taken[t * n + s])
    }

    /// Smallest positive dwell remaining among cars in T.
    pub fn next_expiry(&self) -> Option<u64> {
        self.cars.iter().map(|c| c.dwell_left).filter(|&d| d > 0).min()
    }

    /// Applies an enabled action. Returns what happened, in order, and any
    /// safety breach caused by the move itself.
    pub fn apply(&mut self, layout: &Layout, a: Action) -> (Vec<Emit>, Vec<SafetyKind>) {
        let mut out = Vec::new();
        let mut bad = Vec::new();
        let has_p = layout.params.spots > 0;
        let mut emit = |event: usize, car: Option<usize>, area: String, link: Link| {
            out.push(Emit { event, car, area, link });
            out.len() - 1
        };
        match a {
            Action::Advance(c) => {
                let Pos::Area(i) = self.cars[c].pos else { unreachable!() };
                let j = layout.next(i);
                let (from, to) = (&layout.areas[i], &layout.areas[j]);
                self.occupied[i] = false;
                match from.kind {
                    AreaKind::T => {
                        if self.cars[c].dwell_left > 0 {
                            bad.push(SafetyKind::DwellUnderrun);
                        }
                        self.cars[c].dwell_left = 0;
                        let e = emit(10, Some(c), to.id.clone(), Link::Car);
                        emit(5, None, from.id.clone(), Link::Step(e));
                    }
                    AreaKind::A => {
                        let e = emit(12, Some(c), from.id.clone(), Link::Car);
                        emit(9, None, from.id.clone(), Link::Step(e));
                        if to.kind == AreaKind::C {
                            emit(13, Some(c), to.id.clone(), Link::Step(e));
                        }
                    }
                    AreaKind::C => {
                        if to.kind == AreaKind::C {
                            let e = emit(13, Some(c), to.id.clone(), Link::Car);
                            emit(11, None, from.id.clone(), Link::Step(e));
                        }
                    }
                    AreaKind::B => unreachable!(),
                }
                if to.kind == AreaKind::B {
                    let link = if from.kind == AreaKind::A { Link::Step(0) } else { Link::Car };
                    let e1 = emit(1, Some(c), to.id.clone(), link);
                    if from.kind == AreaKind::C {
                        emit(11, None, from.id.clone(), Link::Step(e1));
                    }
                    let e2 = emit(2, Some(c), to.id.clone(), Link::Step(e1));
                    if has_p {
                        emit(3, Some(c), to.id.clone(), Link::Step(e2));
                    }
                    emit(4, Some(c), to.id.clone(), Link::Step(e2));
                    self.approaching[to.terminal] = true;
                }
                self.occupied[j] = true;
                self.cars[c].pos = Pos::Area(j);
            }
            Action::Reserve(c) => {
                let Pos::Area(i) = self.cars[c].pos else { unreachable!() };
                let t = layout.areas[i].terminal;
                if !World::mutated(layout, Mutation::NoReservation) {
                    self.occupied[layout.t_of(t)] = true;
                    self.reserved[t] = Some(c);
                }
                self.occupied[i] = false;
                self.approaching[t] = false;
                self.cars[c].pos = Pos::Transit(t);
                emit(6, Some(c), layout.areas[i].id.clone(), Link::Car);
            }
            Action::Enter(c) => {
                let Pos::Transit(t) = self.cars[c].pos else { unreachable!() };
                let ti = layout.t_of(t);
                if self.cars.iter().any(|o| o.pos == Pos::Area(ti)) {
                    bad.push(SafetyKind::LostReservation);
                }
                self.reserved[t] = None;
                self.occupied[ti] = true;
                self.cars[c].pos = Pos::Area(ti);
                self.cars[c].dwell_left = DWELL;
                emit(7, Some(c), layout.areas[ti].id.clone(), Link::Car);
            }
            Action::Park(c) => {
                let Pos::Area(i) = self.cars[c].pos else { unreachable!() };
                let t = layout.areas[i].terminal;
                if self.cars[c].dwell_left > 0 {
                    bad.push(SafetyKind::DwellUnderrun);
                }
                let s = self.free_spot(layout, t).expect("park needs a free spot");
                self.spot_taken[t * layout.params.spots + s] = true;
                self.occupied[i] = false;
                self.cars[c].pos = Pos::Spot(t, s);
                self.cars[c].dwell_left = 0;
                let e = emit(14, Some(c), layout.spot_id(t, s), Link::Car);
                emit(5, None, layout.areas[i].id.clone(), Link::Step(e));
            }
            Action::Depart(c) => {
                let Pos::Spot(t, s) = self.cars[c].pos else { unreachable!() };
                if self.approaching[t] {
                    bad.push(SafetyKind::PriorityBreach);
                }
                if self.reserved[t].is_some() {
                    bad.push(SafetyKind::LostReservation);
                }
                self.spot_taken[t * layout.params.spots + s] = false;
                let ti = layout.t_of(t);
                self.occupied[ti] = true;
                self.cars[c].pos = Pos::Area(ti);
                self.cars[c].dwell_left = DWELL;
                emit(15, Some(c), layout.areas[ti].id.clone(), Link::Car);
            }
            Action::Elapse(d) => {
                for (c, car) in self.cars.iter_mut().enumerate() {
                    if car.dwell_left > 0 {
                        car.dwell_left = car.dwell_left.saturating_sub(d);
                        if car.dwell_left == 0 {
                            let Pos::Area(i) = car.pos else { unreachable!() };
                            emit(8, Some(c), layout.areas[i].id.clone(), Link::Car);
                        }
                    }
                }
            }
        }
        if self.doubled() {
            bad.push(SafetyKind::DoubleOccupancy);
        }
        (out, bad)
    }

    /// Two cars in one area or spot.
    pub fn doubled(&self) -> bool {
        let mut seen: Vec<Pos> = self.cars.iter().map(|c| c.pos).filter(|p| !matches!(p, Pos::Transit(_))).collect();
        seen.sort();
        seen.windows(2).any(|w| w[0] == w[1])
    }
}

/// The world's choice points, for building scripts.
pub fn choice_points() -> std::collections::BTreeMap<String, crate::model::ChoicePoint> {
    build_terminal_model(TerminalShape::default()).expect("default shape is valid").model.choices
}
