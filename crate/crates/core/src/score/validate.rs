use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use crate::constraint::{Constraint, LinExpr, Store, VarDecl};

use super::{names, Binding, Duration, Relation, Score};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiagKind {
    Identifier,
    Duplicate,
    Reference,
    Duration,
    Message,
    Param,
    Delay,
    Cycle,
    Point,
    Branch,
    DurationRelation,
    Global,
    StartWindow,
    Horizon,
}

/// A static problem with a score. `subject` is the object (or other) id the
/// problem is about, empty for score-wide issues.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Diagnostic {
    pub subject: String,
    pub kind: DiagKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.subject.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.subject, self.message)
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(s, "and" | "or" | "not" | "true" | "false")
}

struct Diags(Vec<Diagnostic>);

impl Diags {
    fn push(&mut self, subject: &str, kind: DiagKind, message: impl Into<String>) {
        self.0.push(Diagnostic { subject: subject.into(), kind, message: message.into() });
    }
}

/// Static checks; an empty result means the score compiles.
///
/// Diagnostics come sorted by subject, then kind.
pub fn validate(s: &Score) -> Vec<Diagnostic> {
    let mut d = Diags(Vec::new());
    if s.horizon == 0 {
        d.push("", DiagKind::Horizon, "horizon must be at least 1");
    }

    // identifiers and uniqueness
    let mut obj_ids = BTreeSet::new();
    for o in &s.objects {
        if !is_ident(&o.id) {
            d.push(&o.id, DiagKind::Identifier, "invalid object identifier");
        }
        if !obj_ids.insert(o.id.as_str()) {
            d.push(&o.id, DiagKind::Duplicate, "duplicate object id");
        }
    }
    let mut point_ids = BTreeSet::new();
    for p in &s.points {
        if !is_ident(&p.id) {
            d.push(&p.id, DiagKind::Identifier, "invalid point identifier");
        }
        if !point_ids.insert(p.id.as_str()) {
            d.push(&p.id, DiagKind::Duplicate, "duplicate point id");
        }
    }
    let mut var_ids = BTreeSet::new();
    for v in &s.vars {
        if !is_ident(&v.name) {
            d.push(&v.name, DiagKind::Identifier, "invalid variable name");
        }
        if !var_ids.insert(v.name.as_str()) {
            d.push(&v.name, DiagKind::Duplicate, "duplicate variable");
        }
        if v.lo > v.hi {
            d.push(&v.name, DiagKind::Duration, "variable domain is empty");
        }
    }
    let exists = |id: &str| obj_ids.contains(id);

    // generated names must not clash with each other or with score variables
    let groups = s.groups();
    let mut generated: BTreeMap<String, usize> = BTreeMap::new();
    let mut gen = |n: String| *generated.entry(n).or_default() += 1;
    for (i, o) in s.objects.iter().enumerate() {
        if groups[i] == i {
            gen(names::go(&o.id));
            gen(names::sched(&o.id));
        }
        gen(names::start(&o.id));
        gen(names::running(&o.id));
        gen(names::end(&o.id));
        gen(names::dur(&o.id));
        if s.branches.iter().any(|b| b.at == o.id) {
            gen(names::taken(&o.id));
        }
        let mut targets = BTreeSet::new();
        for (k, p) in o.params.iter().enumerate() {
            gen(names::param(&o.id, k));
            if targets.insert(p.target.as_str()) {
                gen(names::param_target(&o.id, &p.target));
            }
        }
    }
    for p in &s.points {
        gen(names::ev(&p.id));
        gen(names::hit(&p.id));
    }
    for v in &s.vars {
        gen(v.name.clone());
    }
    for (name, n) in &generated {
        if *n > 1 {
            d.push("", DiagKind::Identifier, format!("generated name `{name}` collides"));
        }
    }

    // objects
    for o in &s.objects {
        match o.duration {
            Duration::Fixed(0) => d.push(&o.id, DiagKind::Duration, "fixed duration must be at least 1"),
            Duration::Flexible { dmin, dmax } if dmin == 0 || dmin > dmax => {
                d.push(&o.id, DiagKind::Duration, "flexible duration needs 1 <= dmin <= dmax")
            }
            _ => {}
        }
        for m in [&o.start_msg, &o.end_msg].into_iter().flatten() {
            if !m.is_well_formed() {
                d.push(&o.id, DiagKind::Message, "malformed control message");
            }
        }
        for p in &o.params {
            if p.offset >= o.duration.max() {
                d.push(&o.id, DiagKind::Param, format!("param offset {} outside the duration", p.offset));
            }
            if !is_ident(&p.target) {
                d.push(&o.id, DiagKind::Identifier, format!("invalid param target `{}`", p.target));
            }
        }
    }

    // roots
    let mut seen_roots = BTreeSet::new();
    for r in &s.roots {
        if !exists(r) {
            d.push(r, DiagKind::Reference, "unknown root");
        }
        if !seen_roots.insert(r.as_str()) {
            d.push(r, DiagKind::Duplicate, "duplicate root");
        }
    }

    // relations
    let mut prec_edges: Vec<(usize, usize)> = Vec::new();
    for r in &s.relations {
        match r {
            Relation::Precedence { from, to, delay } => {
                for x in [from, to] {
                    if !exists(x) {
                        d.push(x, DiagKind::Reference, "precedence names an unknown object");
                    }
                }
                if delay.0 == 0 || delay.0 > delay.1 {
                    d.push(to, DiagKind::Delay, format!("delay from {from} needs 1 <= min <= max"));
                }
                if let (Some(i), Some(j)) = (s.object_index(from), s.object_index(to)) {
                    prec_edges.push((i, j));
                }
            }
            Relation::SimultaneousStart { a, b } => {
                for x in [a, b] {
                    if !exists(x) {
                        d.push(x, DiagKind::Reference, "simultaneous start names an unknown object");
                    }
                }
            }
            Relation::DurationRel { a, b, .. } => {
                for x in [a, b] {
                    if !exists(x) {
                        d.push(x, DiagKind::Reference, "duration relation names an unknown object");
                    }
                }
            }
        }
    }
    if let Some(cycle_at) = find_cycle(s.objects.len(), &prec_edges) {
        d.push(&s.objects[cycle_at].id, DiagKind::Cycle, "precedence relations form a cycle");
    }

    // interaction points
    let mut bound: BTreeSet<String> = BTreeSet::new();
    let mut start_points: BTreeMap<usize, &str> = BTreeMap::new();
    for p in &s.points {
        let (w0, w1) = p.window;
        if w0 > w1 {
            d.push(&p.id, DiagKind::Point, "window earliest after latest");
        }
        let key = match &p.binds {
            Binding::StartOf(o) => {
                if !exists(o) {
                    d.push(&p.id, DiagKind::Reference, format!("unknown object `{o}`"));
                } else if !s.is_root(o) {
                    d.push(&p.id, DiagKind::Point, format!("start point on `{o}`, which is not a root"));
                } else {
                    let g = groups[s.object_index(o).unwrap()];
                    if start_points.insert(g, &p.id).is_some() {
                        d.push(&p.id, DiagKind::Point, "two start points on one simultaneous group");
                    }
                }
                format!("start {o}")
            }
            Binding::DurationOf(o) => {
                match s.object(o) {
                    None => d.push(&p.id, DiagKind::Reference, format!("unknown object `{o}`")),
                    Some(obj) => match obj.duration {
                        Duration::Fixed(_) => {
                            d.push(&p.id, DiagKind::Point, format!("duration of `{o}` is not flexible"))
                        }
                        Duration::Flexible { dmin, dmax } => {
                            if dmin > w0 + 2 || w1 + 2 > dmax {
                                d.push(
                                    &p.id,
                                    DiagKind::Point,
                                    format!("window [{w0},{w1}] does not fit duration range [{dmin},{dmax}]"),
                                );
                            }
                        }
                    },
                }
                format!("duration {o}")
            }
            Binding::DelayOf { from, to } => {
                let delays: Vec<(u32, u32)> = s
                    .relations
                    .iter()
                    .filter_map(|r| match r {
                        Relation::Precedence { from: f, to: t, delay } if f == from && t == to => Some(*delay),
                        _ => None,
                    })
                    .collect();
                match delays.as_slice() {
                    [] => d.push(&p.id, DiagKind::Reference, format!("no precedence {from} -> {to}")),
                    [(lo, hi)] => {
                        if lo == hi {
                            d.push(&p.id, DiagKind::Point, format!("delay {from} -> {to} is not flexible"));
                        } else if *lo > w0 + 1 || w1 + 1 > *hi {
                            d.push(
                                &p.id,
                                DiagKind::Point,
                                format!("window [{w0},{w1}] does not fit delay range [{lo},{hi}]"),
                            );
                        }
                    }
                    _ => d.push(&p.id, DiagKind::Point, format!("several precedences {from} -> {to}")),
                }
                format!("delay {from} {to}")
            }
        };
        if !bound.insert(key) {
            d.push(&p.id, DiagKind::Point, "target already bound to another point");
        }
    }

    // branches
    let mut branch_at = BTreeSet::new();
    for b in &s.branches {
        if !exists(&b.at) {
            d.push(&b.at, DiagKind::Reference, "branch at unknown object");
        }
        if !branch_at.insert(b.at.as_str()) {
            d.push(&b.at, DiagKind::Branch, "several branches at one object");
        }
        if b.arms.is_empty() && b.default.is_none() {
            d.push(&b.at, DiagKind::Branch, "branch has neither arms nor a default");
        }
        for arm in &b.arms {
            if !exists(&arm.successor) {
                d.push(&b.at, DiagKind::Reference, format!("unknown successor `{}`", arm.successor));
            }
            for v in arm.condition.vars() {
                if !var_ids.contains(v) {
                    d.push(&b.at, DiagKind::Branch, format!("condition uses `{v}`, which is not a score variable"));
                }
            }
        }
        if let Some(def) = &b.default {
            if !exists(def) {
                d.push(&b.at, DiagKind::Reference, format!("unknown default successor `{def}`"));
            }
        }
    }

    let structural = !d.0.iter().any(|x| {
        matches!(x.kind, DiagKind::Reference | DiagKind::Duplicate | DiagKind::Duration | DiagKind::Identifier)
    });

    // duration relations and globals
    if structural {
        match s.admissible_durations() {
            Err(ri) => {
                let subject = match &s.relations[ri] {
                    Relation::DurationRel { a, .. } => a.as_str(),
                    _ => "",
                };
                d.push(subject, DiagKind::DurationRelation, "duration relation unsatisfiable");
            }
            Ok(sets) => {
                let mut decls: Vec<VarDecl> = s.vars.clone();
                for (o, set) in s.objects.iter().zip(&sets) {
                    decls.push(VarDecl::new(names::dur(&o.id), set[0], *set.last().unwrap()));
                }
                let known: BTreeSet<String> = decls.iter().map(|v| v.name.clone()).collect();
                let mut globals_ok = true;
                for g in &s.globals {
                    for v in g.vars() {
                        if !known.contains(v) {
                            d.push("", DiagKind::Global, format!("global constraint uses unknown symbol `{v}`"));
                            globals_ok = false;
                        }
                    }
                }
                if globals_ok {
                    if let Ok(mut store) = Store::new(decls) {
                        for c in duration_constraints(s).into_iter().chain(s.globals.iter().cloned()) {
                            let _ = store.tell(c);
                        }
                        if !store.sat() {
                            d.push("", DiagKind::Global, "global constraints unsatisfiable with the duration bounds");
                        }
                    }
                }
            }
        }

        // earliest starts, loops included (shortest paths with non-negative weights)
        for (i, est) in earliest_starts(s, &groups).into_iter().enumerate() {
            if let Some(t) = est {
                if t >= s.horizon as u64 {
                    let id = &s.objects[i].id;
                    d.push(id, DiagKind::StartWindow, format!("{id} start window empty"));
                }
            }
        }
    }

    d.0.sort();
    d.0.dedup();
    d.0
}

/// `dur_a - dur_b - offset rel 0` for every duration relation.
pub(crate) fn duration_constraints(s: &Score) -> Vec<Constraint> {
    s.relations
        .iter()
        .filter_map(|r| match r {
            Relation::DurationRel { a, rel, b, offset } => {
                let lhs = LinExpr::var(names::dur(a));
                let rhs = LinExpr::var(names::dur(b)).add_constant(*offset);
                Some(Constraint::cmp(lhs, rel.symbol(), rhs))
            }
            _ => None,
        })
        .collect()
}

fn find_cycle(n: usize, edges: &[(usize, usize)]) -> Option<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    let mut colour = vec![0u8; n];
    for root in 0..n {
        if colour[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        colour[root] = 1;
        while let Some(&mut (v, ref mut k)) = stack.last_mut() {
            if *k < adj[v].len() {
                let w = adj[v][*k];
                *k += 1;
                match colour[w] {
                    0 => {
                        colour[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => return Some(w),
                    _ => {}
                }
            } else {
                colour[v] = 2;
                stack.pop();
            }
        }
    }
    None
}

/// Earliest possible start unit of every object reachable from the roots.
fn earliest_starts(s: &Score, groups: &[usize]) -> Vec<Option<u64>> {
    let n = s.objects.len();
    let mut est: Vec<Option<u64>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    let mut start_point: BTreeMap<usize, u64> = BTreeMap::new();
    for p in &s.points {
        if let Binding::StartOf(o) = &p.binds {
            if let Some(i) = s.object_index(o) {
                start_point.insert(groups[i], p.window.0 as u64 + 1);
            }
        }
    }
    for r in &s.roots {
        if let Some(i) = s.object_index(r) {
            let g = groups[i];
            heap.push(Reverse((start_point.get(&g).copied().unwrap_or(0), g)));
        }
    }
    let mut succ: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    for r in &s.relations {
        if let Relation::Precedence { from, to, delay } = r {
            if let (Some(i), Some(j)) = (s.object_index(from), s.object_index(to)) {
                succ[i].push((groups[j], delay.0 as u64));
            }
        }
    }
    for b in &s.branches {
        let Some(i) = s.object_index(&b.at) else { continue };
        for arm in &b.arms {
            if let Some(j) = s.object_index(&arm.successor) {
                succ[i].push((groups[j], 1));
            }
        }
        if let Some(j) = b.default.as_deref().and_then(|x| s.object_index(x)) {
            succ[i].push((groups[j], 2));
        }
    }
    let mut group_est: BTreeMap<usize, u64> = BTreeMap::new();
    while let Some(Reverse((t, g))) = heap.pop() {
        if group_est.contains_key(&g) {
            continue;
        }
        group_est.insert(g, t);
        for i in (0..n).filter(|&i| groups[i] == g) {
            est[i] = Some(t);
            let end = t + s.objects[i].duration.min() as u64 - 1;
            for &(h, delay) in &succ[i] {
                if !group_est.contains_key(&h) {
                    heap.push(Reverse((end + delay, h)));
                }
            }
        }
    }
    est
}

impl Diagnostic {
    pub fn new(subject: &str, kind: DiagKind, message: &str) -> Self {
        Diagnostic { subject: subject.to_string(), kind, message: message.to_string() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::parse_constraint;
    use crate::score::{Arm, ConditionalBranch, DurRel, InteractionPoint, TemporalObject};

    fn two(a: TemporalObject, b: TemporalObject, horizon: u32) -> Score {
        Score { objects: vec![a, b], roots: vec!["A".into()], horizon, ..Score::default() }
    }

    #[test]
    fn empty_score_is_valid() {
        assert!(validate(&Score::empty(1)).is_empty());
        assert_eq!(validate(&Score::empty(0)).len(), 1);
    }

    #[test]
    fn start_window_empty() {
        let mut s = two(TemporalObject::fixed("A", 3), TemporalObject::fixed("B", 1), 4);
        s.relations.push(Relation::Precedence { from: "A".into(), to: "B".into(), delay: (2, 2) });
        let diags = validate(&s);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].message, "B start window empty");
        s.horizon = 5;
        assert!(validate(&s).is_empty());
    }

    #[test]
    fn duration_relation_unsatisfiable() {
        let mut s = two(TemporalObject::fixed("A", 3), TemporalObject::flexible("B", 5, 8), 20);
        s.relations.push(Relation::DurationRel { a: "A".into(), rel: DurRel::Eq, b: "B".into(), offset: 0 });
        let diags = validate(&s);
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert_eq!(diags[0].message, "duration relation unsatisfiable");
    }

    #[test]
    fn references_points_and_branches() {
        let mut s = two(TemporalObject::fixed("A", 3), TemporalObject::flexible("B", 2, 6), 20);
        s.relations.push(Relation::Precedence { from: "A".into(), to: "Z".into(), delay: (1, 1) });
        s.points.push(InteractionPoint { id: "p".into(), binds: Binding::DurationOf("B".into()), window: (0, 5) });
        s.points.push(InteractionPoint { id: "q".into(), binds: Binding::StartOf("B".into()), window: (0, 5) });
        s.branches.push(ConditionalBranch {
            at: "A".into(),
            arms: vec![Arm { condition: parse_constraint("k < 2").unwrap(), successor: "A".into() }],
            default: None,
        });
        let kinds: Vec<(String, DiagKind)> = validate(&s).into_iter().map(|d| (d.subject, d.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                ("A".into(), DiagKind::Branch),
                ("Z".into(), DiagKind::Reference),
                ("p".into(), DiagKind::Point),
                ("q".into(), DiagKind::Point),
            ]
        );
    }

    #[test]
    fn precedence_cycle_and_loops() {
        let mut s = two(TemporalObject::fixed("A", 1), TemporalObject::fixed("B", 1), 20);
        s.relations.push(Relation::Precedence { from: "A".into(), to: "B".into(), delay: (1, 1) });
        s.vars.push(VarDecl::new("k", 0, 3));
        s.branches.push(ConditionalBranch {
            at: "B".into(),
            arms: vec![Arm { condition: parse_constraint("k < 2").unwrap(), successor: "A".into() }],
            default: None,
        });
        assert!(validate(&s).is_empty());
        s.relations.push(Relation::Precedence { from: "B".into(), to: "A".into(), delay: (1, 1) });
        assert_eq!(validate(&s)[0].kind, DiagKind::Cycle);
    }

    #[test]
    fn globals_and_collisions() {
        let mut s = two(TemporalObject::fixed("A", 3), TemporalObject::flexible("B", 2, 6), 20);
        s.globals.push(parse_constraint("dur_A + dur_B <= 4").unwrap());
        assert_eq!(validate(&s)[0].kind, DiagKind::Global);
        s.globals[0] = parse_constraint("dur_A + dur_B <= 6").unwrap();
        assert!(validate(&s).is_empty());
        s.vars.push(VarDecl::new("go_A", 0, 1));
        assert_eq!(validate(&s)[0].kind, DiagKind::Identifier);
    }
}
