//! Translation of a score into process definitions, and a direct simulator
//! of score semantics used to cross-check the translation.
//!
//! Unit conventions shared by both:
//!
//! * an object started at unit `s` with duration `d` runs in `s..s+d-1` and
//!   signals its end in unit `s+d-1`;
//! * a successor with delay `δ` starts at `s+d-1+δ`;
//! * an event in the input of unit `t` takes effect at `t+1`;
//! * a branch arm starts its successor one unit after the end, the default
//!   arm two units after;
//! * flexible values without an interaction point take their minimum, and a
//!   point that never fires is forced at the latest unit of its window.

mod oracle;

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::constraint::{Constraint, LinExpr, StoreError, VarDecl, VarTable};
use crate::ntcc::{DefTable, Process};
use crate::score::{duration_constraints, names, validate, Binding, ControlMessage, Diagnostic, Duration, Relation, Score};

pub use oracle::{oracle_simulate, OracleTrace};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("validate first: {} diagnostic(s), first: {}", .0.len(), .0[0])]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// What kind of variable an environment entry is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarRole {
    /// Per-unit boolean produced by the compiled process or the input.
    Signal,
    /// `dur_<object>` symbol.
    Duration,
    /// Score-level variable asserted by the environment.
    Score,
}

/// Static information about an interaction point, for the runtime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointInfo {
    pub id: String,
    pub event: String,
    pub hit: String,
    /// Signal whose unit opens the window (`None`: unit 0).
    pub anchor: Option<String>,
    pub window: (u32, u32),
}

#[derive(Clone, Debug)]
pub struct CompiledScore {
    pub score: Score,
    pub defs: DefTable,
    pub entry: Process,
    pub env: Arc<VarTable>,
    pub roles: Vec<VarRole>,
    /// Signal whose entailment emits the message, in emission order.
    pub msgmap: Vec<(String, ControlMessage)>,
    pub alphabet: Vec<String>,
    pub points: Vec<PointInfo>,
}

impl CompiledScore {
    /// Names of the signal variables, in declaration order.
    pub fn signals(&self) -> impl Iterator<Item = &str> {
        self.env.decls().iter().zip(&self.roles).filter(|(_, r)| **r == VarRole::Signal).map(|(d, _)| d.name.as_str())
    }

    pub fn role(&self, name: &str) -> Option<VarRole> {
        self.env.decls().iter().position(|d| d.name == name).map(|i| self.roles[i])
    }

    /// Textual dump of the definitions and the entry process.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for d in self.env.decls() {
            out.push_str(&format!("var {d}\n"));
        }
        for (name, def) in self.defs.iter() {
            out.push_str(&format!("def {}({}) = {}\n", name, def.params.join(","), def.body));
        }
        out.push_str(&format!("entry = {}\n", self.entry));
        out
    }
}

const C: &str = "#c";
const N: &str = "#n";

fn on(name: &str) -> Constraint {
    Constraint::eq(name, 1)
}

fn tell1(name: &str) -> Process {
    Process::tell(on(name))
}

fn c_plus(k: i64) -> LinExpr {
    LinExpr::from_terms([(1, C)], k)
}

fn c_cmp(op: &str, k: i64) -> Constraint {
    Constraint::cmp(LinExpr::var(C), op, LinExpr::constant(k))
}

/// `Go(g)`: schedule group `g` to start in the next unit.
fn go(group: &str) -> Process {
    Process::par([tell1(&names::sched(group)), Process::next(tell1(&names::go(group)))])
}

struct Ctx<'a> {
    s: &'a Score,
    groups: Vec<usize>,
    adm: Vec<Vec<i64>>,
}

impl Ctx<'_> {
    fn group_of(&self, id: &str) -> &str {
        let i = self.s.object_index(id).expect("validated");
        &self.s.objects[self.groups[i]].id
    }

    fn point_on(&self, b: impl Fn(&Binding) -> bool) -> Option<&crate::score::InteractionPoint> {
        self.s.points.iter().find(|p| b(&p.binds))
    }
}

/// Waits for an interaction-point event in the window, then runs `fire`;
/// forced at the latest unit.
fn point_chain(defs: &mut DefTable, name: &str, ev: &str, hit: &str, window: (u32, u32), fire: Process) {
    let (w0, w1) = (window.0 as i64, window.1 as i64);
    let again = Process::call(name, [c_plus(1)]);
    let body = Process::par([
        Process::when(c_cmp("<", w0), Process::next(again.clone())),
        Process::when(
            Constraint::and(c_cmp(">=", w0), c_cmp("<", w1)),
            Process::par([
                Process::when(on(ev), Process::par([tell1(hit), fire.clone()])),
                Process::unless(on(ev), again),
            ]),
        ),
        Process::when(c_cmp("=", w1), Process::par([Process::when(on(ev), tell1(hit)), fire])),
    ]);
    defs.insert(name, vec![C.into()], body);
}

/// Compiles a validated score.
pub fn compile(s: &Score) -> Result<CompiledScore, CompileError> {
    let diags = validate(s);
    if !diags.is_empty() {
        return Err(CompileError::Invalid(diags));
    }
    let adm = s.admissible_durations().expect("validated");
    let cx = Ctx { s, groups: s.groups(), adm };

    // environment
    let mut decls: Vec<VarDecl> = Vec::new();
    let mut roles = Vec::new();
    let mut push = |d: VarDecl, r: VarRole| {
        decls.push(d);
        roles.push(r);
    };
    for (i, o) in s.objects.iter().enumerate() {
        if cx.groups[i] == i {
            push(VarDecl::signal(names::go(&o.id)), VarRole::Signal);
            push(VarDecl::signal(names::sched(&o.id)), VarRole::Signal);
        }
        push(VarDecl::signal(names::start(&o.id)), VarRole::Signal);
        push(VarDecl::signal(names::running(&o.id)), VarRole::Signal);
        push(VarDecl::signal(names::end(&o.id)), VarRole::Signal);
        let mut targets: Vec<&str> = Vec::new();
        for (k, p) in o.params.iter().enumerate() {
            push(VarDecl::signal(names::param(&o.id, k)), VarRole::Signal);
            if !targets.contains(&p.target.as_str()) {
                targets.push(&p.target);
            }
        }
        for t in targets {
            push(VarDecl::signal(names::param_target(&o.id, t)), VarRole::Signal);
        }
        if s.branches.iter().any(|b| b.at == o.id) {
            push(VarDecl::signal(names::taken(&o.id)), VarRole::Signal);
        }
        let set = &cx.adm[i];
        push(VarDecl::new(names::dur(&o.id), set[0], *set.last().unwrap()), VarRole::Duration);
    }
    for p in &s.points {
        push(VarDecl::signal(names::ev(&p.id)), VarRole::Signal);
        push(VarDecl::signal(names::hit(&p.id)), VarRole::Signal);
    }
    for v in &s.vars {
        push(v.clone(), VarRole::Score);
    }
    let env = Arc::new(VarTable::new(decls)?);

    let mut defs = DefTable::new();
    let mut msgmap = Vec::new();
    let mut points = Vec::new();

    for (i, o) in s.objects.iter().enumerate() {
        let id = o.id.as_str();
        let g = String::from(cx.group_of(id));
        let flexible = o.duration.is_flexible();
        let wait = format!("Wait_{id}");
        let active = format!("Active_{id}");
        let hold = format!("Hold_{id}");
        let done = format!("Done_{id}");
        let dur = names::dur(id);

        msgmap.push((names::start(id), o.start_message()));
        for (k, p) in o.params.iter().enumerate() {
            msgmap.push((names::param(id, k), ControlMessage::param(id, p.target.clone(), p.value)));
        }
        msgmap.push((names::end(id), o.end_message()));

        // what runs in every unit of the object, at offset #c
        let mut each_unit = vec![tell1(&names::running(id)), Process::when(c_cmp("=", 0), tell1(&names::start(id)))];
        for (k, p) in o.params.iter().enumerate() {
            each_unit.push(Process::when(
                c_cmp("=", p.offset as i64),
                Process::par([tell1(&names::param(id, k)), tell1(&names::param_target(id, &p.target))]),
            ));
        }

        // Finish(#n), in the last unit
        let mut finish = vec![tell1(&names::end(id))];
        for r in &s.relations {
            let Relation::Precedence { from, to, delay } = r else { continue };
            if from != id {
                continue;
            }
            let target = go(cx.group_of(to));
            let point = cx.point_on(|b| matches!(b, Binding::DelayOf { from: f, to: t } if f == from && t == to));
            finish.push(match point {
                Some(p) => Process::call(format!("Delay_{}", p.id), [LinExpr::constant(0)]),
                None if delay.0 == delay.1 => Process::next_n(delay.0 - 1, target),
                None => Process::sum((delay.0..=delay.1).map(|d| (Constraint::True, Process::next_n(d - 1, target.clone())))),
            });
        }
        if let Some(b) = s.branches.iter().find(|b| b.at == id) {
            if !b.arms.is_empty() {
                finish.push(Process::Sum(
                    b.arms
                        .iter()
                        .map(|a| crate::ntcc::Branch {
                            guard: a.condition.clone(),
                            body: Process::par([go(cx.group_of(&a.successor)), tell1(&names::taken(id))]),
                        })
                        .collect(),
                ));
            }
            if let Some(def) = &b.default {
                finish.push(Process::unless(on(&names::taken(id)), go(cx.group_of(def))));
            }
        }
        finish.push(Process::next(Process::call(wait.clone(), [])));
        if flexible {
            finish.push(Process::unless(on(&names::sched(&g)), Process::call(done.clone(), [LinExpr::var(N)])));
            defs.insert(
                done.clone(),
                vec![N.into()],
                Process::par([
                    Process::tell(Constraint::cmp(LinExpr::var(dur.clone()), "=", LinExpr::var(N))),
                    Process::unless(on(&names::sched(&g)), Process::call(done.clone(), [LinExpr::var(N)])),
                ]),
            );
        }
        let finish = Process::par(finish);

        // Active(#c, #n)
        let mut body = each_unit.clone();
        if flexible {
            body.push(Process::tell(Constraint::cmp(LinExpr::var(dur.clone()), "=", LinExpr::var(N))));
        }
        let last = LinExpr::from_terms([(1, N)], -1);
        body.push(Process::when(
            Constraint::cmp(LinExpr::var(C), "<", last.clone()),
            Process::next(Process::call(active.clone(), [c_plus(1), LinExpr::var(N)])),
        ));
        body.push(Process::when(Constraint::cmp(LinExpr::var(C), "=", last), finish));
        defs.insert(active.clone(), vec![C.into(), N.into()], Process::par(body));

        // Begin
        let duration_point = cx.point_on(|b| matches!(b, Binding::DurationOf(x) if x == id));
        let begin = match (o.duration, duration_point) {
            (Duration::Fixed(d), _) => Process::call(active.clone(), [LinExpr::constant(0), LinExpr::constant(d as i64)]),
            (Duration::Flexible { .. }, None) => Process::sum(
                cx.adm[i]
                    .iter()
                    .map(|&d| (Constraint::True, Process::call(active.clone(), [LinExpr::constant(0), LinExpr::constant(d)]))),
            ),
            (Duration::Flexible { .. }, Some(p)) => {
                let (w0, w1) = (p.window.0 as i64, p.window.1 as i64);
                let ev = names::ev(&p.id);
                let hit = names::hit(&p.id);
                let dur_is = |k: i64| Process::tell(Constraint::cmp(LinExpr::var(dur.clone()), "=", c_plus(k)));
                let resolve = Process::par([dur_is(2), Process::next(Process::call(active.clone(), [c_plus(1), c_plus(2)]))]);
                let again = Process::call(hold.clone(), [c_plus(1)]);
                let mut hb = each_unit.clone();
                hb.push(Process::tell(Constraint::cmp(LinExpr::var(dur.clone()), ">=", c_plus(1))));
                hb.push(Process::when(c_cmp("<", w0), Process::next(again.clone())));
                hb.push(Process::when(
                    Constraint::and(c_cmp(">=", w0), c_cmp("<", w1)),
                    Process::par([
                        Process::when(on(&ev), Process::par([tell1(&hit), resolve.clone()])),
                        Process::unless(on(&ev), again),
                    ]),
                ));
                hb.push(Process::when(c_cmp("=", w1), Process::par([Process::when(on(&ev), tell1(&hit)), resolve])));
                defs.insert(hold.clone(), vec![C.into()], Process::par(hb));
                Process::call(hold.clone(), [LinExpr::constant(0)])
            }
        };
        let go_g = names::go(&g);
        defs.insert(
            wait.clone(),
            vec![],
            Process::par([Process::when(on(&go_g), begin), Process::unless(on(&go_g), Process::call(wait, []))]),
        );
    }

    // interaction points
    let mut entry = Vec::new();
    for p in &s.points {
        let ev = names::ev(&p.id);
        let hit = names::hit(&p.id);
        let anchor = match &p.binds {
            Binding::StartOf(o) => {
                point_chain(&mut defs, &format!("Delay_{}", p.id), &ev, &hit, p.window, go(cx.group_of(o)));
                entry.push(Process::call(format!("Delay_{}", p.id), [LinExpr::constant(0)]));
                None
            }
            Binding::DelayOf { from, to } => {
                point_chain(&mut defs, &format!("Delay_{}", p.id), &ev, &hit, p.window, go(cx.group_of(to)));
                Some(names::end(from))
            }
            Binding::DurationOf(o) => Some(names::start(o)),
        };
        points.push(PointInfo { id: p.id.clone(), event: ev, hit, anchor, window: p.window });
    }

    // roots without a start point
    let mut started: Vec<&str> = Vec::new();
    for r in &s.roots {
        let g = cx.group_of(r);
        let has_point = s.points.iter().any(|p| matches!(&p.binds, Binding::StartOf(o) if cx.group_of(o) == g));
        if !has_point && !started.contains(&g) {
            started.push(g);
        }
    }
    let mut head: Vec<Process> = started.iter().map(|g| tell1(&names::go(g))).collect();
    head.append(&mut entry);
    for o in &s.objects {
        head.push(Process::call(format!("Wait_{}", o.id), []));
    }
    for c in duration_constraints(s) {
        head.push(Process::bang(Process::tell(c)));
    }
    for g in &s.globals {
        head.push(Process::bang(Process::tell(g.clone())));
    }

    debug_assert!(defs.check().is_ok(), "{:?}", defs.check());
    Ok(CompiledScore {
        score: s.clone(),
        defs,
        entry: Process::par(head),
        env,
        roles,
        msgmap,
        alphabet: s.event_alphabet(),
        points,
    })
}

