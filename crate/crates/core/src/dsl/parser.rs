use std::collections::BTreeMap;
use std::sync::Arc;

use super::lexer::{Tok, Token};
use super::{Diagnostic, Document, KEYWORDS};
use crate::dynamics::{BehaviorSpec, DelayBounds, EdgeSpec, Element, EventRegion, RegionSpec};
use crate::model::{
    Capacity, ChoicePoint, Flag, FlowArc, Guard, Machine, SlotRef, StageKind, StageRef, StaticModel, Storage,
    TriggerArc, TriggerTarget,
};
use crate::validate::{find_slot, find_stage, LookupError};

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

struct RawFlag {
    name: String,
    pos: Pos,
    values: Vec<String>,
    initial: String,
}

struct RawMachine {
    name: String,
    pos: Pos,
    stages: Vec<(StageKind, Pos)>,
    flags: Vec<RawFlag>,
    storage: Vec<(Storage, Pos)>,
    subs: Vec<RawMachine>,
}

enum RawTarget {
    Stage(String, Pos),
    Assign(String, String, Pos),
}

enum RawGuard {
    Eq(String, String, Pos),
    AtLeast(String, u64, Pos),
    Below(String, u64, Pos),
    Not(Box<RawGuard>),
    And(Box<RawGuard>, Box<RawGuard>),
    Or(Box<RawGuard>, Box<RawGuard>),
}

enum RawElement {
    Stage(String, Pos),
    Flow(String, String, Pos),
    Trigger(String, RawTarget, Pos),
    Flag(String, Pos),
    Storage(String, Pos),
}

struct RawEdge {
    from: String,
    to: String,
    delay: DelayBounds,
    pos: Pos,
}

enum Stmt {
    Machine(RawMachine),
    Flow { from: String, to: String, pos: Pos },
    Trigger { from: String, target: RawTarget, guard: Option<RawGuard>, pos: Pos },
    Region { name: String, pos: Pos, elements: Vec<RawElement>, anchor: RawElement },
    Event { name: String, region: String, pos: Pos },
    Behavior { name: String, pos: Pos, starts: Vec<(String, Pos)>, edges: Vec<RawEdge> },
    Choice { name: String, pos: Pos, outcomes: Vec<String> },
}

const STATEMENTS: [&str; 7] = ["machine", "flow", "trigger", "region", "event", "behavior", "choice"];

struct Parser {
    toks: Vec<Token>,
    i: usize,
    depth: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn pos(&self) -> Pos {
        let t = &self.toks[self.i];
        Pos { line: t.line, col: t.col }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        match t {
            Tok::LBrace => self.depth += 1,
            Tok::RBrace => self.depth = self.depth.saturating_sub(1),
            _ => {}
        }
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let p = self.pos();
        Err(Diagnostic::error(p.line, p.col, msg))
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect(&mut self, want: Tok) -> PResult<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {}, found {}", want.describe(), self.peek().describe()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.at_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected '{kw}', found {}", self.peek().describe()))
        }
    }

    /// Any identifier that is not a keyword; dotted only when `dotted`.
    fn ident(&mut self, what: &str, dotted: bool) -> PResult<(String, Pos)> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) => {
                self.err(format!("'{s}' is a reserved keyword and cannot be used as {what}"))
            }
            Tok::Ident(s) if !dotted && s.contains('.') => self.err(format!("{what} must not contain '.'")),
            Tok::Ident(s) => {
                self.bump();
                Ok((s, pos))
            }
            other => self.err(format!("expected {what}, found {}", other.describe())),
        }
    }

    fn value(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n.to_string())
            }
            // values sit where no keyword can start, so only `init` is off limits
            Tok::Ident(s) if s != "init" && !s.contains('.') => {
                self.bump();
                Ok(s)
            }
            _ => self.ident("a value", false).map(|(s, _)| s),
        }
    }

    fn int(&mut self) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            other => self.err(format!("expected an integer, found {}", other.describe())),
        }
    }

    fn int_or_inf(&mut self) -> PResult<Option<u64>> {
        if self.at_kw("inf") {
            self.bump();
            Ok(None)
        } else {
            self.int().map(Some)
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let kw = match self.peek() {
            Tok::Ident(s) if STATEMENTS.contains(&s.as_str()) => s.clone(),
            other => return self.err(format!("expected a declaration, found {}", other.describe())),
        };
        match kw.as_str() {
            "machine" => self.machine().map(Stmt::Machine),
            "flow" => {
                self.bump();
                let (from, _) = self.ident("a stage path", true)?;
                self.expect(Tok::Arrow)?;
                let (to, _) = self.ident("a stage path", true)?;
                Ok(Stmt::Flow { from, to, pos })
            }
            "trigger" => {
                self.bump();
                let (from, _) = self.ident("a stage path", true)?;
                self.expect(Tok::Arrow)?;
                let target = self.target()?;
                let guard = if self.at_kw("when") {
                    self.bump();
                    Some(self.guard_or()?)
                } else {
                    None
                };
                Ok(Stmt::Trigger { from, target, guard, pos })
            }
            "region" => {
                self.bump();
                let (name, pos) = self.ident("a region name", false)?;
                self.expect(Tok::LBrace)?;
                let mut elements = vec![self.element()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    elements.push(self.element()?);
                }
                self.expect_kw("anchor")?;
                let anchor = self.element()?;
                self.expect(Tok::RBrace)?;
                Ok(Stmt::Region { name, pos, elements, anchor })
            }
            "event" => {
                self.bump();
                let (name, pos) = self.ident("an event name", false)?;
                self.expect_kw("on")?;
                let (region, _) = self.ident("a region name", false)?;
                Ok(Stmt::Event { name, region, pos })
            }
            "behavior" => {
                self.bump();
                let (name, pos) = self.ident("a behavior name", false)?;
                self.expect(Tok::LBrace)?;
                let mut starts = Vec::new();
                let mut edges = Vec::new();
                loop {
                    if *self.peek() == Tok::RBrace {
                        self.bump();
                        break;
                    }
                    if self.at_kw("start") {
                        self.bump();
                        starts.push(self.ident("an event name", false)?);
                        continue;
                    }
                    let (from, epos) = self.ident("an event name", false)?;
                    self.expect(Tok::Arrow)?;
                    let (to, _) = self.ident("an event name", false)?;
                    let mut delay = DelayBounds::ANY;
                    if self.at_kw("delay") {
                        self.bump();
                        self.expect(Tok::LBracket)?;
                        let min = self.int()?;
                        self.expect(Tok::Comma)?;
                        let max = self.int_or_inf()?;
                        self.expect(Tok::RBracket)?;
                        if max.is_some_and(|m| m < min) {
                            return Err(Diagnostic::error(epos.line, epos.col, "delay minimum exceeds maximum"));
                        }
                        delay = DelayBounds::new(min, max);
                    }
                    edges.push(RawEdge { from, to, delay, pos: epos });
                }
                Ok(Stmt::Behavior { name, pos, starts, edges })
            }
            "choice" => {
                self.bump();
                let (name, pos) = self.ident("a choice name", false)?;
                self.expect(Tok::LBrace)?;
                let mut outcomes = vec![self.value()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    outcomes.push(self.value()?);
                }
                self.expect(Tok::RBrace)?;
                Ok(Stmt::Choice { name, pos, outcomes })
            }
            _ => unreachable!(),
        }
    }

    fn machine(&mut self) -> PResult<RawMachine> {
        self.expect_kw("machine")?;
        let (name, pos) = self.ident("a machine name", false)?;
        self.expect(Tok::LBrace)?;
        let mut m =
            RawMachine { name, pos, stages: Vec::new(), flags: Vec::new(), storage: Vec::new(), subs: Vec::new() };
        loop {
            match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    return Ok(m);
                }
                Tok::Ident(s) if s == "stages" => {
                    self.bump();
                    self.expect(Tok::Colon)?;
                    loop {
                        let p = self.pos();
                        let (k, _) = self.ident("a stage kind", false)?;
                        let Some(kind) = StageKind::parse(&k) else {
                            return Err(Diagnostic::error(p.line, p.col, format!("'{k}' is not a stage kind")));
                        };
                        m.stages.push((kind, p));
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                Tok::Ident(s) if s == "flag" => {
                    self.bump();
                    let (name, pos) = self.ident("a flag name", false)?;
                    self.expect(Tok::LBrace)?;
                    let mut values = Vec::new();
                    while !self.at_kw("init") {
                        values.push(self.value()?);
                        self.expect(Tok::Comma)?;
                    }
                    self.bump();
                    let initial = self.value()?;
                    self.expect(Tok::RBrace)?;
                    m.flags.push(RawFlag { name, pos, values, initial });
                }
                Tok::Ident(s) if s == "storage" => {
                    let p = self.pos();
                    self.bump();
                    let (name, _) = self.ident("a storage name", false)?;
                    self.expect_kw("cap")?;
                    let capacity = match self.int_or_inf()? {
                        Some(c) => Capacity::Bounded(c),
                        None => Capacity::Unbounded,
                    };
                    let level = if self.at_kw("level") {
                        self.bump();
                        self.int()?
                    } else {
                        0
                    };
                    m.storage.push((Storage { name, capacity, level }, p));
                }
                Tok::Ident(s) if s == "machine" => {
                    let sub = self.machine()?;
                    m.subs.push(sub);
                }
                other => return self.err(format!("unexpected {} in machine body", other.describe())),
            }
        }
    }

    fn target(&mut self) -> PResult<RawTarget> {
        let (path, pos) = self.ident("a stage or flag path", true)?;
        if *self.peek() == Tok::Assign {
            self.bump();
            let v = self.value()?;
            Ok(RawTarget::Assign(path, v, pos))
        } else {
            Ok(RawTarget::Stage(path, pos))
        }
    }

    fn element(&mut self) -> PResult<RawElement> {
        let pos = self.pos();
        if self.at_kw("flow") {
            self.bump();
            let (a, _) = self.ident("a stage path", true)?;
            self.expect(Tok::Arrow)?;
            let (b, _) = self.ident("a stage path", true)?;
            return Ok(RawElement::Flow(a, b, pos));
        }
        if self.at_kw("trigger") {
            self.bump();
            let (a, _) = self.ident("a stage path", true)?;
            self.expect(Tok::Arrow)?;
            let t = self.target()?;
            return Ok(RawElement::Trigger(a, t, pos));
        }
        if self.at_kw("flag") {
            self.bump();
            let (a, _) = self.ident("a flag path", true)?;
            return Ok(RawElement::Flag(a, pos));
        }
        if self.at_kw("storage") {
            self.bump();
            let (a, _) = self.ident("a storage path", true)?;
            return Ok(RawElement::Storage(a, pos));
        }
        let (a, _) = self.ident("a region element", true)?;
        Ok(RawElement::Stage(a, pos))
    }

    fn guard_or(&mut self) -> PResult<RawGuard> {
        let mut g = self.guard_and()?;
        while self.at_kw("or") {
            self.bump();
            let r = self.guard_and()?;
            g = RawGuard::Or(Box::new(g), Box::new(r));
        }
        Ok(g)
    }

    fn guard_and(&mut self) -> PResult<RawGuard> {
        let mut g = self.guard_unary()?;
        while self.at_kw("and") {
            self.bump();
            let r = self.guard_unary()?;
            g = RawGuard::And(Box::new(g), Box::new(r));
        }
        Ok(g)
    }

    fn guard_unary(&mut self) -> PResult<RawGuard> {
        if self.at_kw("not") {
            self.bump();
            return Ok(RawGuard::Not(Box::new(self.guard_unary()?)));
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let g = self.guard_or()?;
            self.expect(Tok::RParen)?;
            return Ok(g);
        }
        let (name, pos) = self.ident("a flag, choice or storage", true)?;
        match self.peek() {
            Tok::EqEq => {
                self.bump();
                Ok(RawGuard::Eq(name, self.value()?, pos))
            }
            Tok::GtEq => {
                self.bump();
                Ok(RawGuard::AtLeast(name, self.int()?, pos))
            }
            Tok::Lt => {
                self.bump();
                Ok(RawGuard::Below(name, self.int()?, pos))
            }
            other => self.err(format!("expected '==', '>=' or '<', found {}", other.describe())),
        }
    }

    /// Skips to the next top-level declaration keyword.
    fn recover(&mut self) {
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::Ident(s) if self.depth == 0 && STATEMENTS.contains(&s.as_str()) => return,
                _ => {
                    self.bump();
                }
            }
        }
    }
}

fn diag(pos: Pos, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(pos.line, pos.col, msg)
}

fn lookup_msg(e: LookupError, what: &str) -> String {
    match e {
        LookupError::NotFound(p) => format!("unknown {what} '{p}'"),
        LookupError::AmbiguousPath { path, .. } => format!("{what} path '{path}' is ambiguous"),
    }
}

struct Resolver<'a> {
    model: &'a StaticModel,
    diags: Vec<Diagnostic>,
}

impl Resolver<'_> {
    fn stage(&mut self, path: &str, pos: Pos) -> Option<StageRef> {
        find_stage(self.model, path).map_err(|e| self.diags.push(diag(pos, lookup_msg(e, "stage")))).ok()
    }

    fn slot(&mut self, path: &str, pos: Pos, flag: bool) -> Option<SlotRef> {
        let what = if flag { "flag" } else { "storage" };
        find_slot(self.model, path, flag).map_err(|e| self.diags.push(diag(pos, lookup_msg(e, what)))).ok()
    }

    fn target(&mut self, t: &RawTarget) -> Option<TriggerTarget> {
        match t {
            RawTarget::Stage(p, pos) => self.stage(p, *pos).map(|stage| TriggerTarget::Stage { stage }),
            RawTarget::Assign(p, v, pos) => {
                let flag = self.slot(p, *pos, true)?;
                let ok = self.model.flag(&flag).is_some_and(|f| f.values.contains(v));
                if !ok {
                    self.diags.push(diag(*pos, format!("'{v}' is not a value of flag {flag}")));
                    return None;
                }
                Some(TriggerTarget::Assign { flag, value: v.clone() })
            }
        }
    }

    fn guard(&mut self, g: &RawGuard) -> Option<Guard> {
        Some(match g {
            RawGuard::Eq(name, v, pos) => {
                if let Some(c) = self.model.choices.get(name) {
                    if !c.outcomes.contains(v) {
                        self.diags.push(diag(*pos, format!("'{v}' is not an outcome of choice {name}")));
                        return None;
                    }
                    Guard::ChoiceIs(name.clone(), v.clone())
                } else {
                    let flag = self.slot(name, *pos, true)?;
                    if !self.model.flag(&flag).is_some_and(|f| f.values.contains(v)) {
                        self.diags.push(diag(*pos, format!("'{v}' is not a value of flag {flag}")));
                        return None;
                    }
                    Guard::FlagIs(flag, v.clone())
                }
            }
            RawGuard::AtLeast(name, n, pos) => Guard::StorageAtLeast(self.slot(name, *pos, false)?, *n),
            RawGuard::Below(name, n, pos) => Guard::StorageBelow(self.slot(name, *pos, false)?, *n),
            RawGuard::Not(a) => Guard::Not(Box::new(self.guard(a)?)),
            RawGuard::And(a, b) => {
                let (a, b) = (self.guard(a), self.guard(b));
                Guard::And(Box::new(a?), Box::new(b?))
            }
            RawGuard::Or(a, b) => {
                let (a, b) = (self.guard(a), self.guard(b));
                Guard::Or(Box::new(a?), Box::new(b?))
            }
        })
    }

    fn element(&mut self, e: &RawElement) -> Option<Element> {
        match e {
            RawElement::Stage(p, pos) => self.stage(p, *pos).map(Element::stage),
            RawElement::Flow(a, b, pos) => {
                let (a, b) = (self.stage(a, *pos)?, self.stage(b, *pos)?);
                let arc = FlowArc::new(a, b);
                if !self.model.flows.contains(&arc) {
                    self.diags.push(diag(*pos, format!("no flow {arc} is declared")));
                    return None;
                }
                Some(Element::Flow { arc })
            }
            RawElement::Trigger(a, t, pos) => {
                let from = self.stage(a, *pos)?;
                let to = self.target(t)?;
                let el = Element::trigger(from, to);
                if !el.resolves_in(self.model) {
                    self.diags.push(diag(*pos, format!("no {el} is declared")));
                    return None;
                }
                Some(el)
            }
            RawElement::Flag(p, pos) => self.slot(p, *pos, true).map(Element::flag),
            RawElement::Storage(p, pos) => self.slot(p, *pos, false).map(Element::storage),
        }
    }
}

fn build_machine(raw: &RawMachine, diags: &mut Vec<Diagnostic>) -> Machine {
    let mut m = Machine::new(raw.name.clone());
    for (k, p) in &raw.stages {
        if !m.stages.insert(*k) {
            diags.push(diag(*p, format!("stage '{k}' declared twice in machine {}", raw.name)));
        }
    }
    for f in &raw.flags {
        if m.flags.contains_key(&f.name) {
            diags.push(diag(f.pos, format!("flag '{}' declared twice", f.name)));
            continue;
        }
        m.flags.insert(
            f.name.clone(),
            Flag { name: f.name.clone(), values: f.values.clone(), initial: f.initial.clone() },
        );
    }
    for (i, (s, p)) in raw.storage.iter().enumerate() {
        if i > 0 {
            diags.push(diag(*p, format!("machine {} already has a storage", raw.name)));
        } else {
            m.storage = Some(s.clone());
        }
    }
    for sub in &raw.subs {
        if m.submachines.contains_key(&sub.name) {
            diags.push(diag(sub.pos, format!("machine '{}' declared twice", sub.name)));
            continue;
        }
        let built = build_machine(sub, diags);
        m.submachines.insert(sub.name.clone(), built);
    }
    m
}

pub(super) fn parse_tokens(toks: Vec<Token>, mut diags: Vec<Diagnostic>) -> Result<Document, Vec<Diagnostic>> {
    let mut p = Parser { toks, i: 0, depth: 0 };
    let mut stmts = Vec::new();
    while *p.peek() != Tok::Eof {
        let start = p.i;
        match p.statement() {
            Ok(s) => stmts.push(s),
            Err(d) => {
                diags.push(d);
                if p.i == start {
                    p.bump();
                }
                p.recover();
            }
        }
    }

    let mut model = StaticModel::new();
    for s in &stmts {
        match s {
            Stmt::Machine(raw) => {
                if model.machines.contains_key(&raw.name) {
                    diags.push(diag(raw.pos, format!("machine '{}' declared twice", raw.name)));
                } else {
                    let m = build_machine(raw, &mut diags);
                    model.add_machine(m);
                }
            }
            Stmt::Choice { name, pos, outcomes } => {
                if model.choices.contains_key(name) {
                    diags.push(diag(*pos, format!("choice '{name}' declared twice")));
                } else {
                    model.choices.insert(name.clone(), ChoicePoint { name: name.clone(), outcomes: outcomes.clone() });
                }
            }
            _ => {}
        }
    }

    let mut flows = Vec::new();
    let mut triggers = Vec::new();
    {
        let mut r = Resolver { model: &model, diags: Vec::new() };
        for s in &stmts {
            match s {
                Stmt::Flow { from, to, pos } => {
                    let (a, b) = (r.stage(from, *pos), r.stage(to, *pos));
                    if let (Some(a), Some(b)) = (a, b) {
                        flows.push(FlowArc::new(a, b));
                    }
                }
                Stmt::Trigger { from, target, guard, pos } => {
                    let f = r.stage(from, *pos);
                    let t = r.target(target);
                    let g = guard.as_ref().map(|g| r.guard(g));
                    if let (Some(from), Some(to)) = (f, t) {
                        match g {
                            Some(None) => {}
                            Some(Some(g)) => triggers.push(TriggerArc { from, to, guard: Some(g) }),
                            None => triggers.push(TriggerArc { from, to, guard: None }),
                        }
                    }
                }
                _ => {}
            }
        }
        diags.append(&mut r.diags);
    }
    model.flows.extend(flows);
    model.triggers.extend(triggers);

    let shared = Arc::new(model.clone());
    let mut regions: BTreeMap<String, RegionSpec> = BTreeMap::new();
    let mut events: BTreeMap<String, String> = BTreeMap::new();
    let mut behaviors: BTreeMap<String, BehaviorSpec> = BTreeMap::new();
    let mut r = Resolver { model: &model, diags: Vec::new() };
    for s in &stmts {
        if let Stmt::Region { name, pos, elements, anchor } = s {
            let els: Vec<Option<Element>> = elements.iter().map(|e| r.element(e)).collect();
            let anchor = r.element(anchor);
            if els.iter().any(Option::is_none) || anchor.is_none() {
                continue;
            }
            let spec = RegionSpec::new(name, els.into_iter().flatten(), anchor.unwrap());
            if regions.contains_key(name) {
                r.diags.push(diag(*pos, format!("region '{name}' declared twice")));
                continue;
            }
            match EventRegion::new(&shared, spec.clone()) {
                Ok(_) => {
                    regions.insert(name.clone(), spec);
                }
                Err(e) => r.diags.push(diag(*pos, e.to_string())),
            }
        }
    }
    for s in &stmts {
        if let Stmt::Event { name, region, pos } = s {
            if events.contains_key(name) {
                r.diags.push(diag(*pos, format!("DUPLICATE_EVENT_ID: event '{name}' declared twice")));
            } else if !regions.contains_key(region) {
                r.diags.push(diag(*pos, format!("unknown region '{region}'")));
            } else {
                events.insert(name.clone(), region.clone());
            }
        }
    }
    for s in &stmts {
        if let Stmt::Behavior { name, pos, starts, edges } = s {
            if behaviors.contains_key(name) {
                r.diags.push(diag(*pos, format!("behavior '{name}' declared twice")));
                continue;
            }
            let mut b = BehaviorSpec { name: name.clone(), ..Default::default() };
            let mut ok = true;
            for (st, p) in starts {
                if !events.contains_key(st) {
                    r.diags.push(diag(*p, format!("UNKNOWN_EVENT: '{st}'")));
                    ok = false;
                }
                b.starts.insert(st.clone());
            }
            let mut seen = std::collections::BTreeSet::new();
            for e in edges {
                for end in [&e.from, &e.to] {
                    if !events.contains_key(end) {
                        r.diags.push(diag(e.pos, format!("UNKNOWN_EVENT: '{end}'")));
                        ok = false;
                    }
                }
                if !seen.insert((e.from.clone(), e.to.clone())) {
                    r.diags.push(diag(e.pos, format!("edge {} -> {} declared twice", e.from, e.to)));
                    ok = false;
                }
                b.edges.insert(EdgeSpec { from: e.from.clone(), to: e.to.clone(), delay: e.delay });
            }
            if ok {
                behaviors.insert(name.clone(), b);
            }
        }
    }
    diags.append(&mut r.diags);

    if diags.is_empty() {
        Ok(Document { model, regions, events, behaviors })
    } else {
        Err(diags)
    }
}
