//! Text format for models (`.tm` files).
//!
//! ```text
//! machine Money { stages: transfer, receive, process }
//! flow Money.transfer -> Money.receive
//! trigger Money.process -> Light.light = on when Coins.coins < 1
//! region A { Money.transfer, flow Money.transfer -> Money.receive anchor Money.transfer }
//! event E_A on A
//! behavior main { E_A -> E_B delay [0, 60] }
//! ```
//!
//! `#` starts a comment. Paths name a machine by any suffix of its qualified
//! name; the printer always writes fully qualified paths.

mod lexer;
mod parser;
pub(crate) mod print;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::dynamics::{
    build_behavior, BehaviorSpec, BehavioralModel, DynamicsError, EdgeSpec, EventRegion, EventSet, RegionSpec,
};
use crate::model::StaticModel;

pub use print::serialize;

/// Words that cannot be used as names.
pub const KEYWORDS: [&str; 22] = [
    "machine", "stages", "flag", "init", "storage", "cap", "level", "inf", "flow", "trigger", "when", "region",
    "anchor", "event", "on", "behavior", "start", "delay", "and", "or", "not", "choice",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub text: String,
    pub origin: String,
}

impl SourceUnit {
    /// Normalizes CRLF and lone CR to LF.
    pub fn new(text: &str, origin: &str) -> Self {
        SourceUnit { text: text.replace("\r\n", "\n").replace('\r', "\n"), origin: origin.to_string() }
    }

    pub fn inline(text: &str) -> Self {
        Self::new(text, "<inline>")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagSeverity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: DiagSeverity,
}

impl Diagnostic {
    pub fn error(line: usize, column: usize, message: impl Into<String>) -> Self {
        Diagnostic { line, column, message: message.into(), severity: DiagSeverity::Error }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            DiagSeverity::Error => "error",
            DiagSeverity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

/// Everything a source file declares.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Document {
    pub model: StaticModel,
    pub regions: BTreeMap<String, RegionSpec>,
    /// Event id to region name.
    pub events: BTreeMap<String, String>,
    pub behaviors: BTreeMap<String, BehaviorSpec>,
}

/// Parses a source unit. Names are resolved; semantic validation of the
/// static model is left to [`crate::validate::validate_static`].
pub fn parse(src: &SourceUnit) -> Result<Document, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let toks = lexer::lex(&src.text, &mut diags);
    parser::parse_tokens(toks, diags)
}

/// Parses text directly.
pub fn parse_str(text: &str) -> Result<Document, Vec<Diagnostic>> {
    parse(&SourceUnit::inline(text))
}

impl Document {
    pub fn region_specs(&self) -> Vec<RegionSpec> {
        self.regions.values().cloned().collect()
    }

    /// Builds the regions and events against one shared static model.
    pub fn events(&self) -> Result<(Arc<StaticModel>, EventSet), DynamicsError> {
        let model = Arc::new(self.model.clone());
        let mut regions = BTreeMap::new();
        for (name, spec) in &self.regions {
            regions.insert(name.clone(), EventRegion::new(&model, spec.clone())?);
        }
        let mut set = EventSet::new();
        for (id, region) in &self.events {
            let r = regions.get(region).ok_or_else(|| DynamicsError::UnknownEvent(id.clone()))?;
            set.mk_event(r, id)?;
        }
        Ok((model, set))
    }

    /// The named behavioral model over this document's events.
    pub fn behavior(&self, name: &str) -> Result<BehavioralModel, DynamicsError> {
        let spec = self.behaviors.get(name).ok_or_else(|| DynamicsError::UnknownEvent(format!("behavior {name}")))?;
        let (_, set) = self.events()?;
        let edges: Vec<EdgeSpec> = spec.edges.iter().cloned().collect();
        let starts: Vec<String> = spec.starts.iter().cloned().collect();
        // events not mentioned by the behavior still belong to it
        build_behavior(set.into_events(), &edges, (!starts.is_empty()).then_some(starts.as_slice()))
    }

    /// The only behavior, if exactly one is declared.
    pub fn sole_behavior(&self) -> Option<&str> {
        (self.behaviors.len() == 1).then(|| self.behaviors.keys().next().unwrap().as_str())
    }
}
