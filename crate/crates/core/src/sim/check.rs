use std::fmt;

use serde::Serialize;

use super::{Cause, Trace};
use crate::dynamics::BehavioralModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    UnknownEvent,
    BadCause,
    TimeReversed,
    NotAStart,
    NoEdge,
    DelayExceeded,
    DelayTooShort,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::UnknownEvent => "UNKNOWN_EVENT",
            ViolationKind::BadCause => "BAD_CAUSE",
            ViolationKind::TimeReversed => "TIME_REVERSED",
            ViolationKind::NotAStart => "NOT_A_START",
            ViolationKind::NoEdge => "NO_EDGE",
            ViolationKind::DelayExceeded => "DELAY_EXCEEDED",
            ViolationKind::DelayTooShort => "DELAY_TOO_SHORT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceViolation {
    /// Index of the offending occurrence.
    pub index: usize,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub conforms: bool,
    pub violations: Vec<TraceViolation>,
}

impl Verdict {
    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

/// Checks that a trace realizes paths through the behavioral graph.
///
/// Every occurrence names its cause. One caused by a stimulus (or by initial
/// conditions) must be a start event; one caused by an earlier occurrence must
/// follow a graph edge from that occurrence's event, and the tick gap must lie
/// within the edge's delay bounds. Ticks never decrease along the trace.
pub fn check_trace(trace: &Trace, behavior: &BehavioralModel) -> Verdict {
    let mut v = Vec::new();
    let mut push = |index: usize, kind: ViolationKind, message: String| v.push(TraceViolation { index, kind, message });
    for (i, o) in trace.occurrences.iter().enumerate() {
        if i > 0 && o.at < trace.occurrences[i - 1].at {
            push(i, ViolationKind::TimeReversed, format!("tick {} follows tick {}", o.at, trace.occurrences[i - 1].at));
        }
        if !behavior.events.contains_key(&o.event) {
            push(i, ViolationKind::UnknownEvent, format!("{} is not an event of the behavior", o.event));
            continue;
        }
        match Cause::parse(&o.cause) {
            None => push(i, ViolationKind::BadCause, format!("cannot read cause '{}'", o.cause)),
            Some(Cause::Stimulus(_)) | Some(Cause::Init) => {
                if !behavior.starts.contains(&o.event) {
                    push(i, ViolationKind::NotAStart, format!("{} is not a start event", o.event));
                }
            }
            Some(Cause::Occurrence(j)) => {
                if j >= i {
                    push(i, ViolationKind::BadCause, format!("cause {j} does not precede occurrence {i}"));
                    continue;
                }
                let prev = &trace.occurrences[j];
                let Some(bounds) = behavior.edge(&prev.event, &o.event) else {
                    push(i, ViolationKind::NoEdge, format!("no edge {} -> {}", prev.event, o.event));
                    continue;
                };
                let gap = o.at.saturating_sub(prev.at);
                if bounds.max.is_some_and(|m| gap > m) {
                    push(
                        i,
                        ViolationKind::DelayExceeded,
                        format!("{} -> {} took {gap} ticks, bound {bounds}", prev.event, o.event),
                    );
                } else if gap < bounds.min {
                    push(
                        i,
                        ViolationKind::DelayTooShort,
                        format!("{} -> {} took {gap} ticks, bound {bounds}", prev.event, o.event),
                    );
                }
            }
        }
    }
    Verdict { conforms: v.is_empty(), violations: v }
}
