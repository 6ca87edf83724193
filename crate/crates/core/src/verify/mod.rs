//! Bounded model checking of compiled scores against bounded-LTL properties.

mod formula;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::compile::{CompiledScore, VarRole};
use crate::constraint::{Constraint, Store, StoreError};
use crate::engine::{after, entailed_signals, Engine, EngineError, Event};
use crate::ntcc::{ChoicePolicy, Machine, Process, ProcessError, Progress, Quiescent, ScriptedChoice};
use crate::score::Tu;

pub use formula::Formula;
use formula::Nf;

pub const DEFAULT_STATE_BUDGET: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Mode {
    ForAllRuns,
    ExistsRun,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase", deny_unknown_fields))]
pub struct Property {
    pub mode: Mode,
    pub formula: Formula,
}

/// What the environment may do during exploration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EnvSpec {
    /// Point signals that may or may not occur at every unit. Score
    /// variables listed here range over their declared domain.
    pub free_events: Vec<String>,
    /// Events that always occur at the given unit.
    pub scripted: Vec<(Tu, Event)>,
    /// Score variables that may be left unset or assigned one of the values.
    pub var_ranges: BTreeMap<String, Vec<i64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    /// Search nodes expanded (one per unit and reachable state).
    pub states: u64,
    /// Unit transitions taken.
    pub transitions: u64,
    pub memo_hits: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Verified,
    Refuted,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Verified => "VERIFIED",
            Outcome::Refuted => "REFUTED",
        })
    }
}

/// One unit of a counterexample or witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceUnit {
    pub tu: Tu,
    pub inputs: Vec<Event>,
    pub choices: Vec<usize>,
    pub signals: Vec<String>,
    pub failure: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub result: Outcome,
    /// Counterexample for a refuted for-all check, witness for a verified
    /// exists check.
    pub evidence: Option<Vec<TraceUnit>>,
    pub stats: Stats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    pub budget: u64,
    pub memo: bool,
    pub star_bound: u32,
    pub step_budget: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { budget: DEFAULT_STATE_BUDGET, memo: true, star_bound: 0, step_budget: crate::ntcc::DEFAULT_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("budget exhausted after {0} states")]
    BudgetExhausted(u64),
    #[error("formula depth {depth} exceeds horizon {horizon}")]
    DepthExceedsHorizon { depth: u32, horizon: Tu },
    #[error("unknown variable `{0}` in property")]
    UnknownVariable(String),
    #[error("environment: {0}")]
    Environment(String),
    #[error(transparent)]
    Process(#[from] ProcessError),
}

impl From<StoreError> for VerifyError {
    fn from(e: StoreError) -> Self {
        VerifyError::Process(e.into())
    }
}

/// Inputs the environment may offer at each unit.
struct InputSpace {
    signals: Vec<String>,
    vars: Vec<(String, Vec<i64>)>,
    scripted: Vec<(Tu, Event)>,
}

impl InputSpace {
    fn new(cs: &CompiledScore, env: &EnvSpec) -> Result<Self, VerifyError> {
        let mut signals = Vec::new();
        let mut vars: Vec<(String, Vec<i64>)> = Vec::new();
        for name in &env.free_events {
            if cs.points.iter().any(|p| &p.event == name) {
                if !signals.contains(name) {
                    signals.push(name.clone());
                }
            } else if cs.role(name) == Some(VarRole::Score) {
                if !env.var_ranges.contains_key(name) && !vars.iter().any(|(v, _)| v == name) {
                    let d = cs.env.get(name).expect("score var declared");
                    vars.push((name.clone(), (d.lo..=d.hi).collect()));
                }
            } else {
                return Err(VerifyError::Environment(alloc::format!("`{name}` is not an input of this score")));
            }
        }
        for (name, values) in &env.var_ranges {
            let Some(d) = cs.env.get(name).filter(|_| cs.role(name) == Some(VarRole::Score)) else {
                return Err(VerifyError::Environment(alloc::format!("`{name}` is not a score variable")));
            };
            if let Some(v) = values.iter().find(|v| **v < d.lo || **v > d.hi) {
                return Err(VerifyError::Environment(alloc::format!("value {v} for `{name}` outside [{},{}]", d.lo, d.hi)));
            }
            let values: Vec<i64> = values.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
            vars.push((name.clone(), values));
        }
        for (_, ev) in &env.scripted {
            let known = match ev {
                Event::Signal(n) => cs.points.iter().any(|p| &p.event == n),
                Event::Assign(n, _) => cs.role(n) == Some(VarRole::Score),
            };
            if !known {
                return Err(VerifyError::Environment(alloc::format!("unknown event `{ev}`")));
            }
        }
        if signals.len() > 16 {
            return Err(VerifyError::Environment("more than 16 free signals".into()));
        }
        Ok(InputSpace { signals, vars, scripted: env.scripted.clone() })
    }

    /// All input sets for unit `t`, in a fixed order: signal subsets by
    /// ascending bitmask, then per variable unset before each value.
    fn at(&self, t: Tu) -> Vec<Vec<Event>> {
        let base: Vec<Event> = self.scripted.iter().filter(|(u, _)| *u == t).map(|(_, e)| e.clone()).collect();
        let mut out = Vec::new();
        for mask in 0u32..(1 << self.signals.len()) {
            let mut combos: Vec<Vec<Event>> = vec![Vec::new()];
            for (name, values) in &self.vars {
                let mut next = Vec::new();
                for c in &combos {
                    next.push(c.clone());
                    for v in values {
                        let mut c = c.clone();
                        c.push(Event::Assign(name.clone(), *v));
                        next.push(c);
                    }
                }
                combos = next;
            }
            for c in combos {
                let mut evs = base.clone();
                evs.extend(self.signals.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, s)| Event::Signal(s.clone())));
                evs.extend(c);
                let evs: Vec<Event> = evs.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
                out.push(evs);
            }
        }
        out
    }
}

/// Every quiescent outcome of one unit, with the picks that lead to it,
/// in ascending pick order.
fn unit_outcomes(
    machine: &Machine<'_>,
    p: &Process,
    inputs: &[Event],
) -> Result<Vec<(Vec<usize>, Quiescent)>, ProcessError> {
    let input = Constraint::all(inputs.iter().map(Event::constraint));
    let mut out = Vec::new();
    let mut stack = vec![(machine.start(p.clone(), &input)?, Vec::new())];
    while let Some((mut red, picks)) = stack.pop() {
        match red.advance()? {
            Progress::Quiescent => out.push((picks, red.finish())),
            Progress::Choice(point) => {
                // past a failure every option ends the same way
                let n = if red.store().is_consistent() { point.options.len() } else { 1 };
                for i in (0..n).rev() {
                    let mut r = red.clone();
                    r.resolve(i);
                    let mut ps = picks.clone();
                    ps.push(i);
                    stack.push((r, ps));
                }
            }
        }
    }
    Ok(out)
}

struct Search<'a> {
    cs: &'a CompiledScore,
    machine: Machine<'a>,
    inputs: InputSpace,
    horizon: Tu,
    opts: CheckOptions,
    failed: BTreeSet<(Tu, Process, Nf)>,
    stats: Stats,
    path: Vec<TraceUnit>,
}

impl<'a> Search<'a> {
    fn new(cs: &'a CompiledScore, env: &EnvSpec, horizon: Tu, opts: CheckOptions) -> Result<Self, VerifyError> {
        let mut machine = Machine::new(&cs.defs, cs.env.clone());
        machine.budget = opts.step_budget;
        machine.star_bound = opts.star_bound;
        Ok(Search {
            inputs: InputSpace::new(cs, env)?,
            horizon: horizon.min(cs.score.horizon),
            cs,
            machine,
            opts,
            failed: BTreeSet::new(),
            stats: Stats::default(),
            path: Vec::new(),
        })
    }

    /// Looks for a run from unit `t` on which `goal` holds; leaves the run
    /// in `path` when found.
    fn witness(&mut self, t: Tu, p: &Process, goal: &Nf) -> Result<bool, VerifyError> {
        match goal {
            Nf::True => return Ok(true),
            Nf::False => return Ok(false),
            _ if t >= self.horizon => return Ok(goal.at_end()),
            _ => {}
        }
        let key = (t, p.clone(), goal.clone());
        if self.opts.memo && self.failed.contains(&key) {
            self.stats.memo_hits += 1;
            return Ok(false);
        }
        self.stats.states += 1;
        if self.stats.states > self.opts.budget {
            return Err(VerifyError::BudgetExhausted(self.opts.budget));
        }
        for inputs in self.inputs.at(t) {
            for (choices, q) in unit_outcomes(&self.machine, p, &inputs)? {
                self.stats.transitions += 1;
                let next_goal = goal.progress(&q.store)?;
                let signals = entailed_signals(self.cs, &q.store)?;
                let failure = !q.store.is_consistent();
                self.path.push(TraceUnit { tu: t, inputs: inputs.clone(), choices, signals, failure });
                let next = after(failure, q.term)?;
                if self.witness(t + 1, &next, &next_goal)? {
                    return Ok(true);
                }
                self.path.pop();
            }
        }
        if self.opts.memo {
            self.failed.insert(key);
        }
        Ok(false)
    }
}

fn check_formula(cs: &CompiledScore, f: &Formula, horizon: Tu) -> Result<(), VerifyError> {
    for atom in f.atoms() {
        for v in atom.vars() {
            if cs.env.get(v).is_none() {
                return Err(VerifyError::UnknownVariable(v.to_string()));
            }
        }
    }
    let depth = f.depth();
    if depth > horizon {
        return Err(VerifyError::DepthExceedsHorizon { depth, horizon });
    }
    Ok(())
}

/// Checks `prop` over every run of at most `horizon` units (clamped to the
/// score horizon) that `env` allows.
///
/// A for-all check searches for a run satisfying the negation, so
/// `for-all φ` is refuted exactly when `exists ¬φ` is verified, with the
/// same evidence.
pub fn check(cs: &CompiledScore, prop: &Property, env: &EnvSpec, horizon: Tu, opts: CheckOptions) -> Result<Verdict, VerifyError> {
    let horizon = horizon.min(cs.score.horizon);
    check_formula(cs, &prop.formula, horizon)?;
    let mut search = Search::new(cs, env, horizon, opts)?;
    let goal = Nf::from_formula(&prop.formula, prop.mode == Mode::ForAllRuns);
    let found = search.witness(0, &cs.entry, &goal)?;
    let result = match (prop.mode, found) {
        (Mode::ForAllRuns, false) | (Mode::ExistsRun, true) => Outcome::Verified,
        _ => Outcome::Refuted,
    };
    Ok(Verdict { result, evidence: found.then_some(search.path), stats: search.stats })
}

/// Whether some run makes `target` entailed at some unit within `horizon`.
pub fn reachable(cs: &CompiledScore, target: &Constraint, env: &EnvSpec, horizon: Tu, opts: CheckOptions) -> Result<Verdict, VerifyError> {
    let horizon = horizon.min(cs.score.horizon);
    let prop = Property { mode: Mode::ExistsRun, formula: Formula::eventually(horizon, Formula::atom(target.clone())) };
    check(cs, &prop, env, horizon, opts)
}

/// Replays evidence through the runtime engine with its inputs and picks,
/// and reports whether every unit reproduces the recorded signals.
pub fn replay(cs: &alloc::sync::Arc<CompiledScore>, evidence: &[TraceUnit]) -> Result<bool, EngineError> {
    let mut engine = Engine::new(cs.clone(), ChoicePolicy::deterministic(), cs.score.horizon)?;
    for unit in evidence {
        if unit.tu != engine.tu() {
            return Ok(false);
        }
        let mut chooser = ScriptedChoice::new(unit.choices.clone());
        let rec = engine.tick_with(unit.inputs.clone(), &mut chooser)?;
        if rec.signals != unit.signals || rec.failure != unit.failure || rec.choices != unit.choices {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A complete run together with each unit's store.
#[derive(Clone, Debug)]
pub struct ExploredRun {
    pub units: Vec<TraceUnit>,
    pub stores: Vec<Store>,
}

/// Enumerates every run of exactly `horizon` units. Exponential; meant for
/// small scores and cross-checks.
pub fn explore_all(cs: &CompiledScore, env: &EnvSpec, horizon: Tu, opts: CheckOptions) -> Result<Vec<ExploredRun>, VerifyError> {
    let search = Search::new(cs, env, horizon, opts)?;
    let mut out = Vec::new();
    let mut stack = vec![(0, cs.entry.clone(), ExploredRun { units: Vec::new(), stores: Vec::new() })];
    let mut states = 0u64;
    while let Some((t, p, run)) = stack.pop() {
        if t >= search.horizon {
            out.push(run);
            continue;
        }
        states += 1;
        if states > opts.budget {
            return Err(VerifyError::BudgetExhausted(opts.budget));
        }
        let mut children = Vec::new();
        for inputs in search.inputs.at(t) {
            for (choices, q) in unit_outcomes(&search.machine, &p, &inputs)? {
                let signals = entailed_signals(cs, &q.store)?;
                let failure = !q.store.is_consistent();
                let mut run = run.clone();
                run.units.push(TraceUnit { tu: t, inputs: inputs.clone(), choices, signals, failure });
                run.stores.push(q.store);
                children.push((t + 1, after(failure, q.term)?, run));
            }
        }
        stack.extend(children.into_iter().rev());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::compile;
    use crate::constraint::parse_constraint;
    use crate::score::{Binding, InteractionPoint, Relation, Score, TemporalObject};
    use alloc::sync::Arc;

    fn a(s: &str) -> Formula {
        Formula::atom(parse_constraint(s).unwrap())
    }

    fn pointed() -> Score {
        Score {
            objects: vec![TemporalObject::fixed("A", 2), TemporalObject::fixed("B", 1)],
            relations: vec![Relation::Precedence { from: "A".into(), to: "B".into(), delay: (1, 3) }],
            points: vec![InteractionPoint { id: "p".into(), binds: Binding::DelayOf { from: "A".into(), to: "B".into() }, window: (0, 2) }],
            roots: vec!["A".into()],
            horizon: 8,
            ..Score::default()
        }
    }

    fn env() -> EnvSpec {
        EnvSpec { free_events: vec!["ev_p".into()], ..EnvSpec::default() }
    }

    #[test]
    fn start_of_b_is_bounded() {
        let cs = compile(&pointed()).unwrap();
        let prop = Property { mode: Mode::ForAllRuns, formula: Formula::eventually(6, a("start_B = 1")) };
        let v = check(&cs, &prop, &env(), 8, CheckOptions::default()).unwrap();
        assert_eq!(v.result, Outcome::Verified);
        assert!(v.evidence.is_none());

        let prop = Property { mode: Mode::ForAllRuns, formula: Formula::eventually(4, a("start_B = 1")) };
        let v = check(&cs, &prop, &env(), 8, CheckOptions::default()).unwrap();
        assert_eq!(v.result, Outcome::Refuted);
        let ev = v.evidence.unwrap();
        assert!(replay(&Arc::new(cs), &ev).unwrap());
    }

    #[test]
    fn reachability_and_witness() {
        let cs = Arc::new(compile(&pointed()).unwrap());
        let v = reachable(&cs, &parse_constraint("start_B = 1").unwrap(), &env(), 8, CheckOptions::default()).unwrap();
        assert_eq!(v.result, Outcome::Verified);
        let w = v.evidence.unwrap();
        // least run in input order: no event, the window closes at unit 3
        assert_eq!(w.len(), 5);
        assert!(w[4].signals.iter().any(|s| s == "start_B"));
        assert!(w.iter().all(|u| u.inputs.is_empty()));
        assert!(replay(&cs, &w).unwrap());

        let mut tampered = w.clone();
        tampered[1].inputs = vec![Event::Signal("ev_p".into())];
        assert!(!replay(&cs, &tampered).unwrap());
    }

    #[test]
    fn memo_does_not_change_answers() {
        let cs = compile(&pointed()).unwrap();
        for k in 1..7 {
            let prop = Property { mode: Mode::ForAllRuns, formula: Formula::eventually(k, a("start_B = 1")) };
            let on = check(&cs, &prop, &env(), 8, CheckOptions::default()).unwrap();
            let off = check(&cs, &prop, &env(), 8, CheckOptions { memo: false, ..CheckOptions::default() }).unwrap();
            assert_eq!(on.result, off.result);
            assert_eq!(on.evidence, off.evidence);
        }
    }

    #[test]
    fn errors() {
        let cs = compile(&pointed()).unwrap();
        let prop = Property { mode: Mode::ForAllRuns, formula: Formula::always(9, a("start_B = 1")) };
        assert!(matches!(check(&cs, &prop, &env(), 8, CheckOptions::default()), Err(VerifyError::DepthExceedsHorizon { .. })));
        let prop = Property { mode: Mode::ForAllRuns, formula: a("nope = 1") };
        assert!(matches!(check(&cs, &prop, &env(), 8, CheckOptions::default()), Err(VerifyError::UnknownVariable(_))));
        let prop = Property { mode: Mode::ForAllRuns, formula: Formula::always(8, Formula::not(a("start_B = 1"))) };
        let tight = CheckOptions { budget: 2, memo: false, ..CheckOptions::default() };
        let v = check(&cs, &Property { mode: Mode::ExistsRun, ..prop }, &env(), 8, tight);
        assert_eq!(v.unwrap_err().to_string(), "budget exhausted after 2 states");
        let bad = EnvSpec { free_events: vec!["ev_q".into()], ..EnvSpec::default() };
        assert!(matches!(reachable(&cs, &Constraint::True, &bad, 8, CheckOptions::default()), Err(VerifyError::Environment(_))));
    }

    #[test]
    fn explore_all_counts_runs() {
        let cs = compile(&pointed()).unwrap();
        let runs = explore_all(&cs, &env(), 4, CheckOptions::default()).unwrap();
        assert_eq!(runs.len(), 16);
        assert!(runs.iter().all(|r| r.units.len() == 4 && r.stores.len() == 4));
    }
}
