use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::constraint::{Constraint, LinExpr, Store, VarDecl};
use crate::engine::Event;
use crate::score::{duration_constraints, names, validate, Binding, ControlMessage, Duration, Relation, Score, Tu};

use super::CompileError;

/// Messages per unit from a direct simulation of a score.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleTrace {
    /// One entry per simulated unit; the failing unit, if any, is the last.
    pub units: Vec<Vec<ControlMessage>>,
    /// First unit whose constraints are unsatisfiable. Simulation stops there.
    pub failure: Option<Tu>,
}

#[derive(Clone, Copy, Debug)]
struct Run {
    start: u64,
    /// Resolved duration; `None` while an interaction point may still end it.
    n: Option<u64>,
}

impl Run {
    fn covers(&self, t: u64) -> bool {
        self.start <= t && self.n.is_none_or(|n| t < self.start + n)
    }
}

struct Waiting {
    point: usize,
    anchor: u64,
    group: usize,
}

/// Simulates a validated score directly from its semantics, under the
/// runtime's deterministic policy, with `events` as scripted input.
///
/// Independent of the process translation apart from the constraint store,
/// which decides branch conditions and detects global-constraint failures.
pub fn oracle_simulate(s: &Score, events: &[(Tu, Event)]) -> Result<OracleTrace, CompileError> {
    let diags = validate(s);
    if !diags.is_empty() {
        return Err(CompileError::Invalid(diags));
    }
    let adm = s.admissible_durations().expect("validated");
    let groups = s.groups();
    let n_obj = s.objects.len();
    let index = |id: &str| s.object_index(id).expect("validated");

    let mut decls: Vec<VarDecl> = s.vars.clone();
    for (o, set) in s.objects.iter().zip(&adm) {
        decls.push(VarDecl::new(names::dur(&o.id), set[0], *set.last().unwrap()));
    }
    let base = Store::new(decls)?;
    let statics: Vec<Constraint> = duration_constraints(s).into_iter().chain(s.globals.iter().cloned()).collect();

    let mut go_at: BTreeSet<(u64, usize)> = BTreeSet::new();
    let mut sched_at: BTreeSet<(u64, usize)> = BTreeSet::new();
    let mut waiting: Vec<Waiting> = Vec::new();
    for (pi, p) in s.points.iter().enumerate() {
        if let Binding::StartOf(o) = &p.binds {
            waiting.push(Waiting { point: pi, anchor: 0, group: groups[index(o)] });
        }
    }
    for r in &s.roots {
        let g = groups[index(r)];
        if !waiting.iter().any(|w| w.group == g) {
            go_at.insert((0, g));
        }
    }

    let duration_point: Vec<Option<usize>> = s
        .objects
        .iter()
        .map(|o| s.points.iter().position(|p| matches!(&p.binds, Binding::DurationOf(x) if *x == o.id)))
        .collect();
    let mut runs: Vec<Option<Run>> = vec![None; n_obj];
    // value told by a finished flexible object until it is scheduled again
    let mut done: Vec<Option<u64>> = vec![None; n_obj];

    let mut units = Vec::new();
    for t in 0..s.horizon as u64 {
        let mut signals: BTreeSet<&str> = BTreeSet::new();
        let mut facts: Vec<Constraint> = Vec::new();
        for (_, e) in events.iter().filter(|(u, _)| *u as u64 == t) {
            match e {
                Event::Signal(name) => {
                    signals.insert(name.as_str());
                }
                Event::Assign(var, v) => facts.push(Constraint::eq(var, *v)),
            }
        }
        let fired = |p: usize| signals.contains(names::ev(&s.points[p].id).as_str());

        for i in 0..n_obj {
            let idle = runs[i].is_none_or(|r| !r.covers(t));
            if idle && go_at.contains(&(t, groups[i])) {
                let o = &s.objects[i];
                let n = match (o.duration, duration_point[i]) {
                    (Duration::Fixed(d), _) => Some(d as u64),
                    (_, None) => Some(adm[i][0] as u64),
                    (_, Some(_)) => None,
                };
                runs[i] = Some(Run { start: t, n });
                done[i] = None;
            }
        }

        let mut messages = Vec::new();
        let mut ended = Vec::new();
        for i in 0..n_obj {
            let o = &s.objects[i];
            let dur = || LinExpr::var(names::dur(&o.id));
            match runs[i] {
                Some(mut run) if run.covers(t) => {
                    let c = t - run.start;
                    if run.n.is_none() {
                        let p = duration_point[i].expect("holding without a point");
                        let (w0, w1) = (s.points[p].window.0 as u64, s.points[p].window.1 as u64);
                        if (c >= w0 && c < w1 && fired(p)) || c == w1 {
                            run.n = Some(c + 2);
                        }
                        facts.push(Constraint::cmp(dur(), ">=", LinExpr::constant(c as i64 + 1)));
                        runs[i] = Some(run);
                    }
                    if let (Some(n), true) = (run.n, o.duration.is_flexible()) {
                        facts.push(Constraint::cmp(dur(), "=", LinExpr::constant(n as i64)));
                    }
                    if c == 0 {
                        messages.push(o.start_message());
                    }
                    for p in o.params.iter().filter(|p| p.offset as u64 == c) {
                        messages.push(ControlMessage::param(o.id.clone(), p.target.clone(), p.value));
                    }
                    if run.n == Some(c + 1) {
                        messages.push(o.end_message());
                        ended.push(i);
                    }
                }
                _ => {
                    if let Some(n) = done[i] {
                        facts.push(Constraint::cmp(dur(), "=", LinExpr::constant(n as i64)));
                    }
                }
            }
        }

        // successors of objects ending now
        for &i in &ended {
            let id = &s.objects[i].id;
            for r in &s.relations {
                let Relation::Precedence { from, to, delay } = r else { continue };
                if from != id {
                    continue;
                }
                let g = groups[index(to)];
                let point = s.points.iter().position(
                    |p| matches!(&p.binds, Binding::DelayOf { from: f, to: x } if f == from && x == to),
                );
                match point {
                    Some(p) => waiting.push(Waiting { point: p, anchor: t, group: g }),
                    None => {
                        let d = delay.0 as u64;
                        sched_at.insert((t + d - 1, g));
                        go_at.insert((t + d, g));
                    }
                }
            }
        }
        waiting.retain(|w| {
            let c = t - w.anchor;
            let (w0, w1) = (s.points[w.point].window.0 as u64, s.points[w.point].window.1 as u64);
            if (c >= w0 && c < w1 && fired(w.point)) || c == w1 {
                sched_at.insert((t, w.group));
                go_at.insert((t + 1, w.group));
                false
            } else {
                true
            }
        });

        let mut store = base.clone();
        for c in facts.into_iter().chain(statics.iter().cloned()) {
            store.tell(c)?;
        }
        if !store.sat() {
            units.push(Vec::new());
            return Ok(OracleTrace { units, failure: Some(t as Tu) });
        }

        for &i in &ended {
            let Some(b) = s.branches.iter().find(|b| b.at == s.objects[i].id) else { continue };
            let mut taken = false;
            for arm in &b.arms {
                if store.entails(&arm.condition)? {
                    let g = groups[index(&arm.successor)];
                    sched_at.insert((t, g));
                    go_at.insert((t + 1, g));
                    taken = true;
                    break;
                }
            }
            if let (false, Some(def)) = (taken, &b.default) {
                let g = groups[index(def)];
                sched_at.insert((t + 1, g));
                go_at.insert((t + 2, g));
            }
        }

        for i in 0..n_obj {
            if !s.objects[i].duration.is_flexible() {
                continue;
            }
            let scheduled = sched_at.contains(&(t, groups[i]));
            if ended.contains(&i) {
                done[i] = if scheduled { None } else { runs[i].and_then(|r| r.n) };
            } else if scheduled {
                done[i] = None;
            }
        }
        units.push(messages);
    }
    Ok(OracleTrace { units, failure: None })
}
