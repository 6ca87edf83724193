use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::constraint::{Constraint, Store, VarDecl, VarMap, VarTable, Watch};

use super::choice::{ChoiceKind, ChoicePoint, Chooser};
use super::process::{Branch, DefTable, Process};
use super::ProcessError;

/// Default cap on internal reduction steps per time unit.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// What happened during a unit, in firing order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Fired {
    /// Branch `branch` of a sum was taken; `pick` is its position among the
    /// `of` enabled branches.
    Sum { branch: u32, pick: u32, of: u32 },
    /// `*P` was scheduled `delay` units ahead.
    Star { delay: u32, of: u32 },
    /// An `unless` was cancelled by its guard.
    Unless,
}

impl Fired {
    /// Index of the option picked at a multi-option choice point.
    pub fn choice(&self) -> Option<usize> {
        match *self {
            Fired::Sum { pick, of, .. } if of > 1 => Some(pick as usize),
            Fired::Star { delay, of } if of > 1 => Some(delay as usize),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
enum Agent {
    Sum(Vec<Branch>),
    Unless(Constraint, Box<Process>),
}

#[derive(Clone, Debug)]
struct Blocked {
    agent: Agent,
    watches: Vec<Watch>,
    checked: Option<u64>,
}

#[derive(Clone, Debug)]
enum Pending {
    Sum { branches: Vec<Branch>, point: ChoicePoint },
    Star { body: Box<Process>, point: ChoicePoint },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Progress {
    /// The reduction waits for [`Reduction::resolve`].
    Choice(ChoicePoint),
    Quiescent,
}

/// Result of running a unit to quiescence.
#[derive(Clone, Debug)]
pub struct Quiescent {
    /// Residual term: blocked agents and `next` bodies, before [`future`].
    pub term: Process,
    pub store: Store,
    pub fired: Vec<Fired>,
}

/// The internal transition system of one time unit.
///
/// Cloning a reduction paused at a choice point is how the explorer visits
/// every option.
#[derive(Clone, Debug)]
pub struct Reduction<'d> {
    defs: &'d DefTable,
    store: Store,
    active: Vec<Process>,
    blocked: Vec<Blocked>,
    later: Vec<Process>,
    locals: Vec<VarDecl>,
    fired: Vec<Fired>,
    pending: Option<Pending>,
    steps: u64,
    budget: u64,
    star_bound: u32,
    fresh: u32,
}

impl<'d> Reduction<'d> {
    pub fn new(defs: &'d DefTable, store: Store, p: Process, budget: u64, star_bound: u32) -> Self {
        Reduction {
            defs,
            store,
            active: alloc::vec![p],
            blocked: Vec::new(),
            later: Vec::new(),
            locals: Vec::new(),
            fired: Vec::new(),
            pending: None,
            steps: 0,
            budget,
            star_bound,
            fresh: 0,
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn fired(&self) -> &[Fired] {
        &self.fired
    }

    /// Runs internal transitions until a choice with several options is
    /// reached or nothing more can happen.
    pub fn advance(&mut self) -> Result<Progress, ProcessError> {
        loop {
            if let Some(p) = &self.pending {
                let point = match p {
                    Pending::Sum { point, .. } | Pending::Star { point, .. } => point.clone(),
                };
                return Ok(Progress::Choice(point));
            }
            if let Some(p) = self.active.pop() {
                self.exec(p)?;
                continue;
            }
            if !self.scan()? {
                return Ok(Progress::Quiescent);
            }
        }
    }

    /// Picks option `pick` of the pending choice point.
    pub fn resolve(&mut self, pick: usize) {
        match self.pending.take() {
            Some(Pending::Sum { mut branches, point }) => {
                let branch = point.options[pick];
                self.fired.push(Fired::Sum { branch, pick: pick as u32, of: point.options.len() as u32 });
                let body = core::mem::replace(&mut branches[branch as usize].body, Process::Skip);
                self.active.push(body);
            }
            Some(Pending::Star { body, point }) => {
                let delay = point.options[pick];
                self.fired.push(Fired::Star { delay, of: point.options.len() as u32 });
                self.schedule(delay, *body);
            }
            None => {}
        }
    }

    /// Runs to quiescence, resolving choices with `chooser`.
    pub fn run(mut self, chooser: &mut dyn Chooser) -> Result<Quiescent, ProcessError> {
        while let Progress::Choice(point) = self.advance()? {
            let pick = chooser.choose(&point);
            self.resolve(pick);
        }
        Ok(self.finish())
    }

    /// Collects the residual. Call after [`Reduction::advance`] returned
    /// [`Progress::Quiescent`].
    pub fn finish(self) -> Quiescent {
        let mut parts = Vec::with_capacity(self.blocked.len() + self.later.len());
        for b in self.blocked {
            parts.push(match b.agent {
                Agent::Sum(bs) => Process::Sum(bs),
                Agent::Unless(g, p) => Process::Unless(g, p),
            });
        }
        parts.extend(self.later.into_iter().map(Process::next));
        let mut term = Process::par(parts);
        for d in self.locals.into_iter().rev() {
            if term.mentions(&d.name) {
                term = Process::local(d, term);
            }
        }
        Quiescent { term, store: self.store, fired: self.fired }
    }

    fn schedule(&mut self, delay: u32, body: Process) {
        if delay == 0 {
            self.active.push(body);
        } else {
            self.later.push(Process::next_n(delay - 1, body));
        }
    }

    fn enabled(&self, branches: &[Branch]) -> Result<Vec<u32>, ProcessError> {
        let mut out = Vec::new();
        for (i, b) in branches.iter().enumerate() {
            if self.store.entails(&b.guard)? {
                out.push(i as u32);
            }
        }
        Ok(out)
    }

    fn fire_sum(&mut self, mut branches: Vec<Branch>, options: Vec<u32>) {
        if options.len() == 1 {
            let branch = options[0];
            self.fired.push(Fired::Sum { branch, pick: 0, of: 1 });
            let body = core::mem::replace(&mut branches[branch as usize].body, Process::Skip);
            self.active.push(body);
        } else {
            self.pending = Some(Pending::Sum { branches, point: ChoicePoint { kind: ChoiceKind::Sum, options } });
        }
    }

    fn exec(&mut self, p: Process) -> Result<(), ProcessError> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(ProcessError::Divergent(self.budget));
        }
        match p {
            Process::Skip => {}
            Process::Tell(c) => self.store.tell(c)?,
            Process::Par(ps) => self.active.extend(ps.into_iter().rev()),
            Process::Sum(bs) => {
                let watches = bs.iter().map(|b| self.store.watch(&b.guard)).collect::<Result<Vec<_>, _>>()?;
                if bs.iter().all(|b| b.guard.is_ground()) {
                    // conditionals on parameters are decided on the spot
                    let options = self.enabled(&bs)?;
                    if options.is_empty() {
                        let checked = Some(self.store.epoch());
                        self.blocked.push(Blocked { agent: Agent::Sum(bs), watches, checked });
                    } else {
                        self.fire_sum(bs, options);
                    }
                } else {
                    self.blocked.push(Blocked { agent: Agent::Sum(bs), watches, checked: None });
                }
            }
            Process::Unless(g, body) => {
                if self.store.entails(&g)? {
                    self.fired.push(Fired::Unless);
                } else {
                    let watches = alloc::vec![self.store.watch(&g)?];
                    let checked = Some(self.store.epoch());
                    self.blocked.push(Blocked { agent: Agent::Unless(g, body), watches, checked });
                }
            }
            Process::Next(body) => self.later.push(*body),
            Process::Star(body) => {
                if self.star_bound == 0 {
                    self.fired.push(Fired::Star { delay: 0, of: 1 });
                    self.active.push(*body);
                } else {
                    let options = (0..=self.star_bound).collect();
                    self.pending = Some(Pending::Star { body, point: ChoicePoint { kind: ChoiceKind::Star, options } });
                }
            }
            Process::Bang(body) => {
                self.later.push(Process::Bang(body.clone()));
                self.active.push(*body);
            }
            Process::Call(name, args) => {
                let body = self.defs.unfold(&name, &args)?;
                self.active.push(body);
            }
            Process::Local(d, body) => {
                let base = match d.name.find('#') {
                    Some(i) => &d.name[..i],
                    None => d.name.as_str(),
                };
                let mut fresh = format!("{base}#{}", self.fresh);
                while self.store.is_declared(&fresh) {
                    self.fresh += 1;
                    fresh = format!("{base}#{}", self.fresh);
                }
                self.fresh += 1;
                let decl = VarDecl::new(fresh.clone(), d.lo, d.hi);
                self.store.declare(decl.clone())?;
                self.locals.push(decl);
                let mut map = BTreeMap::new();
                map.insert(d.name.clone(), VarMap::Rename(fresh));
                self.active.push(body.substitute(&map));
            }
        }
        Ok(())
    }

    /// One pass over the blocked agents: drops cancelled `unless`es and
    /// fires the first enabled sum. Returns whether anything happened.
    fn scan(&mut self) -> Result<bool, ProcessError> {
        let epoch = self.store.epoch();
        let old = core::mem::take(&mut self.blocked);
        let mut kept = Vec::with_capacity(old.len());
        let mut progressed = false;
        let mut iter = old.into_iter();
        while let Some(mut b) = iter.next() {
            if let Some(e) = b.checked {
                if !b.watches.iter().any(|w| self.store.changed_since(w, e)) {
                    kept.push(b);
                    continue;
                }
            }
            match b.agent {
                Agent::Unless(ref g, _) => {
                    if self.store.entails(g)? {
                        self.fired.push(Fired::Unless);
                        progressed = true;
                    } else {
                        b.checked = Some(epoch);
                        kept.push(b);
                    }
                }
                Agent::Sum(ref bs) => {
                    let options = self.enabled(bs)?;
                    if options.is_empty() {
                        b.checked = Some(epoch);
                        kept.push(b);
                    } else {
                        let Agent::Sum(bs) = b.agent else { unreachable!() };
                        kept.extend(iter);
                        self.blocked = kept;
                        self.fire_sum(bs, options);
                        return Ok(true);
                    }
                }
            }
        }
        self.blocked = kept;
        Ok(progressed)
    }
}

/// The residual handed to the next unit: `next P` and cancelled-or-not
/// `unless` bodies survive, blocked sums are dropped.
pub fn future(p: Process) -> Result<Process, ProcessError> {
    Ok(match p {
        Process::Skip | Process::Sum(_) => Process::Skip,
        Process::Next(b) | Process::Unless(_, b) => *b,
        Process::Par(ps) => Process::par(ps.into_iter().map(future).collect::<Result<Vec<_>, _>>()?),
        Process::Local(d, b) => {
            let inner = future(*b)?;
            if inner.mentions(&d.name) {
                Process::local(d, inner)
            } else {
                inner
            }
        }
        p @ (Process::Tell(_) | Process::Star(_) | Process::Bang(_) | Process::Call(..)) => {
            return Err(ProcessError::NotQuiescent(format!("{p}")))
        }
    })
}

/// Observable outcome of one time unit.
#[derive(Clone, Debug)]
pub struct StepResult {
    /// Final store of the unit.
    pub output: Store,
    /// Process for the next unit (already passed through [`future`]).
    pub residual: Process,
    pub fired: Vec<Fired>,
}

impl StepResult {
    /// Canonical text used to compare runs byte for byte.
    pub fn canonical(&self) -> String {
        let mut s = self.output.dump();
        let _ = writeln!(s, "consistent: {}", self.output.is_consistent());
        let _ = writeln!(s, "residual: {}", self.residual);
        let _ = writeln!(s, "fired: {:?}", self.fired);
        s
    }
}

/// Runs processes unit by unit over a fixed environment vocabulary.
#[derive(Clone, Debug)]
pub struct Machine<'d> {
    pub defs: &'d DefTable,
    pub env: Arc<VarTable>,
    pub budget: u64,
    pub star_bound: u32,
}

impl<'d> Machine<'d> {
    pub fn new(defs: &'d DefTable, env: Arc<VarTable>) -> Self {
        Machine { defs, env, budget: DEFAULT_BUDGET, star_bound: 0 }
    }

    /// A reduction of `p` over a fresh store holding `input`.
    pub fn start(&self, p: Process, input: &Constraint) -> Result<Reduction<'d>, ProcessError> {
        let mut store = Store::with_table(self.env.clone());
        store.tell(input.clone())?;
        Ok(Reduction::new(self.defs, store, p, self.budget, self.star_bound))
    }

    pub fn step(&self, p: Process, input: &Constraint, chooser: &mut dyn Chooser) -> Result<StepResult, ProcessError> {
        let q = self.start(p, input)?.run(chooser)?;
        Ok(StepResult { output: q.store, residual: future(q.term)?, fired: q.fired })
    }

    pub fn run(
        &self,
        mut p: Process,
        inputs: &[Constraint],
        chooser: &mut dyn Chooser,
    ) -> Result<Vec<StepResult>, ProcessError> {
        let mut out = Vec::with_capacity(inputs.len());
        for input in inputs {
            let r = self.step(p, input, chooser)?;
            p = r.residual.clone();
            out.push(r);
        }
        Ok(out)
    }
}
