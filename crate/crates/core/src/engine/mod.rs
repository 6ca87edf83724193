//! Logical side of a performance: one call to [`Engine::tick`] runs one time
//! unit of a compiled score. Wall-clock scheduling lives outside this crate.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::compile::{CompiledScore, VarRole};
use crate::constraint::{Constraint, Store};
use crate::ntcc::{future, ChoicePolicy, Chooser, Machine, Process, ProcessError, DEFAULT_BUDGET};
use crate::score::{names, ControlMessage, Tu};

/// An environment input: an interaction-point signal or a score-variable
/// assignment.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    Signal(String),
    Assign(String, i64),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed event `{0}`: expected `name` or `name=value`")]
pub struct EventParseError(pub String);

impl Event {
    /// Parses `ev_p1` or `k=2`.
    pub fn parse(text: &str) -> Result<Event, EventParseError> {
        let text = text.trim();
        let ident = |s: &str| {
            !s.is_empty()
                && s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        };
        let bad = || EventParseError(text.to_string());
        match text.split_once('=') {
            None if ident(text) => Ok(Event::Signal(text.into())),
            Some((name, value)) if ident(name.trim()) => {
                let v = value.trim().parse::<i64>().map_err(|_| bad())?;
                Ok(Event::Assign(name.trim().into(), v))
            }
            _ => Err(bad()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Event::Signal(n) | Event::Assign(n, _) => n,
        }
    }

    pub fn constraint(&self) -> Constraint {
        match self {
            Event::Signal(n) => Constraint::eq(n, 1),
            Event::Assign(n, v) => Constraint::eq(n, *v),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Signal(n) => f.write_str(n),
            Event::Assign(n, v) => write!(f, "{n}={v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("completed")]
    Completed,
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("value {value} for `{var}` outside [{lo},{hi}]")]
    OutOfRange { var: String, value: i64, lo: i64, hi: i64 },
    #[error(transparent)]
    Process(#[from] ProcessError),
}

/// Outcome of offering a live event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ack {
    Queued,
    WindowClosed,
    WindowNotOpen,
}

impl fmt::Display for Ack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ack::Queued => "queued",
            Ack::WindowClosed => "ignored: window closed",
            Ack::WindowNotOpen => "ignored: window not open",
        })
    }
}

/// Record of one executed unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitRecord {
    pub tu: Tu,
    /// Sorted and deduplicated; told together as one conjunction.
    pub inputs: Vec<Event>,
    /// Entailed signals, in declaration order.
    pub signals: Vec<String>,
    pub messages: Vec<ControlMessage>,
    /// Picks made at choice points with several options.
    pub choices: Vec<usize>,
    /// The unit's store was inconsistent; no messages were emitted.
    pub failure: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectState {
    Waiting,
    Active,
    Done,
}

impl ObjectState {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectState::Waiting => "waiting",
            ObjectState::Active => "active",
            ObjectState::Done => "done",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectView {
    pub id: String,
    pub state: ObjectState,
    /// Units left including the current one, when the duration is known.
    pub remaining: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PendingPoint {
    pub id: String,
    pub event: String,
    /// Absolute units.
    pub window: (Tu, Tu),
}

/// State published after each unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    /// Last executed unit (`None` before the first tick).
    pub tu: Option<Tu>,
    pub objects: Vec<ObjectView>,
    /// Points that accept an event in the next unit.
    pub pending_points: Vec<PendingPoint>,
    pub messages: Vec<ControlMessage>,
}

#[derive(Clone, Debug)]
struct Instance {
    point: usize,
    anchor: Tu,
    hit: bool,
}

#[derive(Clone, Debug, Default)]
struct Track {
    started: Option<Tu>,
    running: bool,
    remaining: Option<u32>,
}

/// Whether `ev` belongs to the input vocabulary of `cs` and is in range.
pub fn check_event(cs: &CompiledScore, ev: &Event) -> Result<(), EngineError> {
    let unknown = || EngineError::UnknownEvent(ev.to_string());
    match ev {
        Event::Signal(name) => {
            if cs.points.iter().any(|p| &p.event == name) {
                Ok(())
            } else {
                Err(unknown())
            }
        }
        Event::Assign(name, value) => {
            if cs.role(name) != Some(VarRole::Score) {
                return Err(unknown());
            }
            let d = cs.env.get(name).ok_or_else(unknown)?;
            if *value < d.lo || *value > d.hi {
                return Err(EngineError::OutOfRange { var: name.clone(), value: *value, lo: d.lo, hi: d.hi });
            }
            Ok(())
        }
    }
}

/// Residual for the next unit. A failed unit ends the performance: every
/// later unit fails too.
pub fn after(failure: bool, term: Process) -> Result<Process, ProcessError> {
    if failure {
        Ok(Process::tell(Constraint::False))
    } else {
        future(term)
    }
}

/// Signals entailed by a unit's store, in declaration order.
pub fn entailed_signals(cs: &CompiledScore, store: &Store) -> Result<Vec<String>, ProcessError> {
    let mut signals = Vec::new();
    for name in cs.signals() {
        if store.entails(&Constraint::eq(name, 1))? {
            signals.push(String::from(name));
        }
    }
    Ok(signals)
}

/// Runs a compiled score unit by unit.
pub struct Engine {
    cs: Arc<CompiledScore>,
    process: Process,
    tu: Tu,
    max_units: Tu,
    chooser: Box<dyn Chooser + Send>,
    star_bound: u32,
    budget: u64,
    tracks: Vec<Track>,
    instances: Vec<Instance>,
    last: Option<UnitRecord>,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine").field("tu", &self.tu).field("max_units", &self.max_units).finish_non_exhaustive()
    }
}

impl Engine {
    /// `max_units` is clamped to the score horizon.
    pub fn new(cs: Arc<CompiledScore>, policy: ChoicePolicy, max_units: Tu) -> Result<Self, EngineError> {
        let chooser = policy.chooser()?;
        let instances = cs
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.anchor.is_none())
            .map(|(i, _)| Instance { point: i, anchor: 0, hit: false })
            .collect();
        Ok(Engine {
            process: cs.entry.clone(),
            tu: 0,
            max_units: max_units.min(cs.score.horizon),
            chooser,
            star_bound: policy.star_bound,
            budget: DEFAULT_BUDGET,
            tracks: alloc::vec![Track::default(); cs.score.objects.len()],
            instances,
            last: None,
            cs,
        })
    }

    pub fn compiled(&self) -> &Arc<CompiledScore> {
        &self.cs
    }

    /// Next unit to run.
    pub fn tu(&self) -> Tu {
        self.tu
    }

    pub fn max_units(&self) -> Tu {
        self.max_units
    }

    pub fn is_complete(&self) -> bool {
        self.tu >= self.max_units
    }

    pub fn set_budget(&mut self, budget: u64) {
        self.budget = budget;
    }

    /// Whether `ev` belongs to the score's input vocabulary and is in range.
    pub fn check_event(&self, ev: &Event) -> Result<(), EngineError> {
        check_event(&self.cs, ev)
    }

    /// Live-input filter: a point event is only useful while one of its
    /// windows is open in the next unit.
    pub fn admit(&self, ev: &Event) -> Result<Ack, EngineError> {
        self.check_event(ev)?;
        let Event::Signal(name) = ev else { return Ok(Ack::Queued) };
        let p = self.cs.points.iter().position(|p| &p.event == name).expect("checked");
        let (w0, w1) = self.cs.points[p].window;
        let mut seen = false;
        for inst in self.instances.iter().filter(|i| i.point == p) {
            seen = true;
            let (lo, hi) = (inst.anchor + w0, inst.anchor + w1);
            if !inst.hit && lo <= self.tu && self.tu <= hi {
                return Ok(Ack::Queued);
            }
            if !inst.hit && self.tu < lo {
                return Ok(Ack::WindowNotOpen);
            }
        }
        Ok(if seen { Ack::WindowClosed } else { Ack::WindowNotOpen })
    }

    pub fn tick(&mut self, inputs: Vec<Event>) -> Result<UnitRecord, EngineError> {
        let mut chooser = core::mem::replace(&mut self.chooser, Box::new(crate::ntcc::FirstChoice));
        let r = self.tick_with(inputs, &mut *chooser);
        self.chooser = chooser;
        r
    }

    /// Runs one unit with an explicit chooser (used for replay).
    pub fn tick_with(&mut self, inputs: Vec<Event>, chooser: &mut dyn Chooser) -> Result<UnitRecord, EngineError> {
        if self.is_complete() {
            return Err(EngineError::Completed);
        }
        for ev in &inputs {
            self.check_event(ev)?;
        }
        let inputs: Vec<Event> = inputs.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let input = Constraint::all(inputs.iter().map(Event::constraint));
        let mut machine = Machine::new(&self.cs.defs, self.cs.env.clone());
        machine.budget = self.budget;
        machine.star_bound = self.star_bound;
        let q = machine.start(self.process.clone(), &input)?.run(chooser)?;
        let store = q.store;
        let failure = !store.is_consistent();

        let signals = entailed_signals(&self.cs, &store)?;
        let on: BTreeSet<&str> = signals.iter().map(String::as_str).collect();
        let messages = if failure {
            Vec::new()
        } else {
            self.cs.msgmap.iter().filter(|(s, _)| on.contains(s.as_str())).map(|(_, m)| m.clone()).collect()
        };

        let t = self.tu;
        for (i, o) in self.cs.score.objects.iter().enumerate() {
            let tr = &mut self.tracks[i];
            if on.contains(names::start(&o.id).as_str()) {
                tr.started = Some(t);
            }
            tr.running = on.contains(names::running(&o.id).as_str());
            tr.remaining = match (tr.running, tr.started, store.value(&names::dur(&o.id))) {
                (true, Some(s), Some(d)) if !failure => Some((d - (t - s) as i64).max(0) as u32),
                _ => None,
            };
        }
        for (pi, p) in self.cs.points.iter().enumerate() {
            if let Some(anchor) = &p.anchor {
                if on.contains(anchor.as_str()) {
                    self.instances.push(Instance { point: pi, anchor: t, hit: false });
                }
            }
            if on.contains(p.hit.as_str()) {
                for inst in self.instances.iter_mut().filter(|i| i.point == pi) {
                    if inst.anchor + p.window.0 <= t && t <= inst.anchor + p.window.1 {
                        inst.hit = true;
                    }
                }
            }
        }
        self.process = after(failure, q.term)?;
        self.tu += 1;
        let choices = q.fired.iter().filter_map(|f| f.choice()).collect();
        let rec = UnitRecord { tu: t, inputs, signals, messages, choices, failure };
        self.last = Some(rec.clone());
        Ok(rec)
    }

    pub fn snapshot(&self) -> Snapshot {
        let objects = self
            .cs
            .score
            .objects
            .iter()
            .zip(&self.tracks)
            .map(|(o, tr)| ObjectView {
                id: o.id.clone(),
                state: match (tr.running, tr.started) {
                    (true, _) => ObjectState::Active,
                    (false, Some(_)) => ObjectState::Done,
                    (false, None) => ObjectState::Waiting,
                },
                remaining: tr.remaining,
            })
            .collect();
        let mut pending_points = Vec::new();
        for inst in &self.instances {
            let p = &self.cs.points[inst.point];
            let (lo, hi) = (inst.anchor + p.window.0, inst.anchor + p.window.1);
            if !inst.hit && lo <= self.tu && self.tu <= hi {
                pending_points.push(PendingPoint { id: p.id.clone(), event: p.event.clone(), window: (lo, hi) });
            }
        }
        Snapshot {
            tu: self.last.as_ref().map(|r| r.tu),
            objects,
            pending_points,
            messages: self.last.as_ref().map(|r| r.messages.clone()).unwrap_or_default(),
        }
    }

    /// Runs every remaining unit with scripted inputs.
    pub fn run_script(&mut self, events: &[(Tu, Event)]) -> Result<Vec<UnitRecord>, EngineError> {
        let mut out = Vec::new();
        while !self.is_complete() {
            let t = self.tu;
            let inputs = events.iter().filter(|(u, _)| *u == t).map(|(_, e)| e.clone()).collect();
            out.push(self.tick(inputs)?);
        }
        Ok(out)
    }
}
