use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{Layout, Pos, RailcarError, WorldParams, DWELL};
use crate::sim::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SafetyKind {
    DoubleOccupancy,
    PriorityBreach,
    DwellUnderrun,
    LostReservation,
}

impl fmt::Display for SafetyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SafetyKind::DoubleOccupancy => "DOUBLE_OCCUPANCY",
            SafetyKind::PriorityBreach => "PRIORITY_BREACH",
            SafetyKind::DwellUnderrun => "DWELL_UNDERRUN",
            SafetyKind::LostReservation => "LOST_RESERVATION",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SafetyViolation {
    pub kind: SafetyKind,
    /// Index of the occurrence at which the breach shows.
    pub index: usize,
    pub at: u64,
    pub message: String,
}

/// Replays a railcar trace from the world's initial placement and reports
/// every safety breach it shows. Occurrences without a car only mark flags
/// and are skipped; car occurrences must name an area known to the layout.
pub fn check_safety(trace: &Trace, params: &WorldParams) -> Result<Vec<SafetyViolation>, RailcarError> {
    let layout = Layout::new(params)?;
    let mut pos: BTreeMap<String, Option<String>> = BTreeMap::new();
    for (c, p) in layout.initial_positions()?.into_iter().enumerate() {
        pos.insert(layout.car_id(c), Some(layout.pos_id(p)));
    }
    let mut approaching: BTreeMap<usize, bool> = BTreeMap::new();
    let mut reserved: BTreeMap<usize, String> = BTreeMap::new();
    let mut entered: BTreeMap<String, u64> = BTreeMap::new();
    let mut out = Vec::new();

    let terminal_of = |id: &str| -> Result<usize, RailcarError> {
        match layout.find(id) {
            Some(Pos::Area(i)) => Ok(layout.areas[i].terminal),
            Some(Pos::Spot(t, _)) | Some(Pos::Transit(t)) => Ok(t),
            None => Err(RailcarError::BadParams(format!("unknown area '{id}' in trace"))),
        }
    };

    for (index, o) in trace.occurrences.iter().enumerate() {
        let (Some(car), Some(area)) = (&o.car, &o.area) else { continue };
        let mut push = |kind: SafetyKind, message: String| out.push(SafetyViolation { kind, index, at: o.at, message });
        let t = terminal_of(area)?;
        let place = |pos: &mut BTreeMap<String, Option<String>>, push: &mut dyn FnMut(SafetyKind, String)| {
            if let Some(other) =
                pos.iter().find(|(c, p)| *c != car && p.as_deref() == Some(area.as_str())).map(|(c, _)| c.clone())
            {
                push(SafetyKind::DoubleOccupancy, format!("{car} enters {area} held by {other}"));
            }
            pos.insert(car.clone(), Some(area.clone()));
        };
        match o.event.as_str() {
            "E1" | "E13" => place(&mut pos, &mut push),
            "E2" => {
                approaching.insert(t, true);
            }
            "E6" => {
                approaching.insert(t, false);
                reserved.insert(t, car.clone());
                pos.insert(car.clone(), None);
            }
            "E7" => {
                let taken = pos.iter().any(|(c, p)| c != car && p.as_deref() == Some(area.as_str()));
                if reserved.get(&t) != Some(car) || taken {
                    push(SafetyKind::LostReservation, format!("{car} enters {area} without holding its reservation"));
                }
                reserved.remove(&t);
                place(&mut pos, &mut push);
                entered.insert(car.clone(), o.at);
            }
            "E10" | "E14" => {
                let since = entered.remove(car).unwrap_or(0);
                if o.at.saturating_sub(since) < DWELL {
                    push(
                        SafetyKind::DwellUnderrun,
                        format!("{car} leaves T after {} ticks", o.at.saturating_sub(since)),
                    );
                }
                place(&mut pos, &mut push);
            }
            "E12" => {
                pos.insert(car.clone(), None);
            }
            "E15" => {
                if approaching.get(&t) == Some(&true) {
                    push(
                        SafetyKind::PriorityBreach,
                        format!("{car} leaves parking while {} is approaching", layout.areas[layout.b_of(t)].id),
                    );
                }
                if let Some(holder) = reserved.get(&t) {
                    push(SafetyKind::LostReservation, format!("{car} takes {area} reserved by {holder}"));
                }
                place(&mut pos, &mut push);
                entered.insert(car.clone(), o.at);
            }
            _ => {}
        }
    }
    Ok(out)
}
