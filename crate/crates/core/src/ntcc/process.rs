use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::constraint::{Constraint, LinExpr, VarDecl, VarMap};

use super::ProcessError;

/// One `when guard do body` alternative of a choice.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Branch {
    pub guard: Constraint,
    pub body: Process,
}

/// Process terms.
///
/// `Par` is n-ary; use [`Process::par`] to build flattened compositions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Process {
    Skip,
    Tell(Constraint),
    /// Guarded choice; fires one branch whose guard is entailed.
    Sum(Vec<Branch>),
    Par(Vec<Process>),
    /// Hidden variable scoped to the body.
    Local(VarDecl, Box<Process>),
    Next(Box<Process>),
    /// Body runs in the next time unit unless the guard is entailed now.
    Unless(Constraint, Box<Process>),
    /// Body runs after some bounded, nondeterministically chosen delay.
    Star(Box<Process>),
    /// Body runs in every time unit from now on.
    Bang(Box<Process>),
    /// Call of a parametric definition with integer arguments.
    Call(String, Vec<LinExpr>),
}

impl Process {
    pub fn tell(c: Constraint) -> Process {
        Process::Tell(c)
    }

    pub fn par(items: impl IntoIterator<Item = Process>) -> Process {
        let mut out = Vec::new();
        for p in items {
            match p {
                Process::Skip => {}
                Process::Par(inner) => out.extend(inner),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Process::Skip,
            1 => out.pop().unwrap(),
            _ => Process::Par(out),
        }
    }

    pub fn sum(branches: impl IntoIterator<Item = (Constraint, Process)>) -> Process {
        Process::Sum(branches.into_iter().map(|(guard, body)| Branch { guard, body }).collect())
    }

    pub fn when(guard: Constraint, body: Process) -> Process {
        Process::sum([(guard, body)])
    }

    pub fn next(p: Process) -> Process {
        Process::Next(Box::new(p))
    }

    /// `next^n p`.
    pub fn next_n(n: u32, p: Process) -> Process {
        (0..n).fold(p, |acc, _| Process::next(acc))
    }

    pub fn unless(guard: Constraint, p: Process) -> Process {
        Process::Unless(guard, Box::new(p))
    }

    pub fn star(p: Process) -> Process {
        Process::Star(Box::new(p))
    }

    pub fn bang(p: Process) -> Process {
        Process::Bang(Box::new(p))
    }

    pub fn local(decl: VarDecl, p: Process) -> Process {
        Process::Local(decl, Box::new(p))
    }

    pub fn call(name: impl Into<String>, args: impl IntoIterator<Item = LinExpr>) -> Process {
        Process::Call(name.into(), args.into_iter().collect())
    }

    /// Substitutes variables (constraint variables and definition
    /// parameters alike), stopping at `Local` binders of the same name.
    pub fn substitute(&self, map: &BTreeMap<String, VarMap>) -> Process {
        if map.is_empty() {
            return self.clone();
        }
        let mut f = |v: &str| map.get(v).cloned().unwrap_or(VarMap::Keep);
        match self {
            Process::Skip => Process::Skip,
            Process::Tell(c) => Process::Tell(c.map_vars(&mut f)),
            Process::Sum(bs) => Process::Sum(
                bs.iter()
                    .map(|b| Branch { guard: b.guard.map_vars(&mut f), body: b.body.substitute(map) })
                    .collect(),
            ),
            Process::Par(ps) => Process::Par(ps.iter().map(|p| p.substitute(map)).collect()),
            Process::Local(d, body) => {
                if map.contains_key(&d.name) {
                    let mut inner = map.clone();
                    inner.remove(&d.name);
                    Process::Local(d.clone(), Box::new(body.substitute(&inner)))
                } else {
                    Process::Local(d.clone(), Box::new(body.substitute(map)))
                }
            }
            Process::Next(p) => Process::next(p.substitute(map)),
            Process::Unless(g, p) => Process::Unless(g.map_vars(&mut f), Box::new(p.substitute(map))),
            Process::Star(p) => Process::star(p.substitute(map)),
            Process::Bang(p) => Process::bang(p.substitute(map)),
            Process::Call(n, args) => Process::Call(n.clone(), args.iter().map(|a| a.map_vars(&mut f)).collect()),
        }
    }

    /// Whether `name` occurs free.
    pub fn mentions(&self, name: &str) -> bool {
        let in_c = |c: &Constraint| c.vars().contains(&name);
        match self {
            Process::Skip => false,
            Process::Tell(c) => in_c(c),
            Process::Sum(bs) => bs.iter().any(|b| in_c(&b.guard) || b.body.mentions(name)),
            Process::Par(ps) => ps.iter().any(|p| p.mentions(name)),
            Process::Local(d, p) => d.name != name && p.mentions(name),
            Process::Next(p) | Process::Star(p) | Process::Bang(p) => p.mentions(name),
            Process::Unless(g, p) => in_c(g) || p.mentions(name),
            Process::Call(_, args) => args.iter().any(|a| a.vars().any(|v| v == name)),
        }
    }

    /// Number of nodes, a rough size measure.
    pub fn size(&self) -> usize {
        1 + match self {
            Process::Skip | Process::Tell(_) | Process::Call(..) => 0,
            Process::Sum(bs) => bs.iter().map(|b| b.body.size()).sum(),
            Process::Par(ps) => ps.iter().map(Process::size).sum(),
            Process::Local(_, p) | Process::Next(p) | Process::Unless(_, p) | Process::Star(p) | Process::Bang(p) => {
                p.size()
            }
        }
    }
}

fn fmt_child(p: &Process, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match p {
        Process::Skip | Process::Tell(_) | Process::Call(..) => write!(f, "{p}"),
        _ => write!(f, "({p})"),
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Process::Skip => f.write_str("skip"),
            Process::Tell(c) => write!(f, "tell({c})"),
            Process::Sum(bs) => {
                for (i, b) in bs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "when {} do ", b.guard)?;
                    fmt_child(&b.body, f)?;
                }
                Ok(())
            }
            Process::Par(ps) => {
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" || ")?;
                    }
                    fmt_child(p, f)?;
                }
                Ok(())
            }
            Process::Local(d, p) => {
                write!(f, "local {}:[{},{}] in ", d.name, d.lo, d.hi)?;
                fmt_child(p, f)
            }
            Process::Next(p) => {
                f.write_str("next ")?;
                fmt_child(p, f)
            }
            Process::Unless(g, p) => {
                write!(f, "unless {g} next ")?;
                fmt_child(p, f)
            }
            Process::Star(p) => {
                f.write_str("*")?;
                fmt_child(p, f)
            }
            Process::Bang(p) => {
                f.write_str("!")?;
                fmt_child(p, f)
            }
            Process::Call(n, args) => {
                write!(f, "{n}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub params: Vec<String>,
    pub body: Process,
}

/// Parametric process definitions, the recursion mechanism of the calculus.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DefTable {
    defs: BTreeMap<String, Definition>,
}

impl DefTable {
    pub fn new() -> Self {
        DefTable::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, params: Vec<String>, body: Process) {
        self.defs.insert(name.into(), Definition { params, body });
    }

    pub fn get(&self, name: &str) -> Option<&Definition> {
        self.defs.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Definition)> {
        self.defs.iter()
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    /// Instantiates `name(args)`; every argument must be ground.
    pub fn unfold(&self, name: &str, args: &[LinExpr]) -> Result<Process, ProcessError> {
        let def = self.defs.get(name).ok_or_else(|| ProcessError::UnknownDefinition(name.into()))?;
        if def.params.len() != args.len() {
            return Err(ProcessError::Arity { name: name.into(), expected: def.params.len(), found: args.len() });
        }
        let mut map = BTreeMap::new();
        for (p, a) in def.params.iter().zip(args) {
            if !a.is_ground() {
                return Err(ProcessError::NonGroundArgument(name.into()));
            }
            map.insert(p.clone(), VarMap::Value(a.constant_term()));
        }
        Ok(def.body.substitute(&map))
    }

    /// Checks call targets, arities and that every recursive cycle passes
    /// through `next` or `unless`.
    pub fn check(&self) -> Result<(), ProcessError> {
        let mut graph: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (name, def) in &self.defs {
            self.check_process(&def.body)?;
            let mut calls = BTreeSet::new();
            unguarded_calls(&def.body, &mut calls);
            graph.insert(name.as_str(), calls);
        }
        // iterative DFS with colours, reporting the first cycle found
        let mut colour: BTreeMap<&str, u8> = BTreeMap::new();
        for &root in graph.keys() {
            if colour.get(root).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut path: Vec<&str> = Vec::new();
            let mut stack: Vec<(&str, Vec<&str>)> = Vec::new();
            colour.insert(root, 1);
            path.push(root);
            stack.push((root, graph[root].iter().copied().collect()));
            while let Some((node, succ)) = stack.last_mut() {
                match succ.pop() {
                    Some(next) => match colour.get(next).copied().unwrap_or(0) {
                        0 => {
                            colour.insert(next, 1);
                            path.push(next);
                            let s = graph[next].iter().copied().collect();
                            stack.push((next, s));
                        }
                        1 => {
                            let start = path.iter().position(|&n| n == next).unwrap_or(0);
                            let mut cycle: Vec<String> = path[start..].iter().map(|s| String::from(*s)).collect();
                            cycle.push(next.into());
                            return Err(ProcessError::UnguardedRecursion(cycle));
                        }
                        _ => {}
                    },
                    None => {
                        colour.insert(node, 2);
                        path.pop();
                        stack.pop();
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that every call in `p` names a definition with matching arity.
    pub fn check_process(&self, p: &Process) -> Result<(), ProcessError> {
        match p {
            Process::Skip | Process::Tell(_) => Ok(()),
            Process::Sum(bs) => bs.iter().try_for_each(|b| self.check_process(&b.body)),
            Process::Par(ps) => ps.iter().try_for_each(|p| self.check_process(p)),
            Process::Local(_, p) | Process::Next(p) | Process::Unless(_, p) | Process::Star(p) | Process::Bang(p) => {
                self.check_process(p)
            }
            Process::Call(n, args) => match self.defs.get(n) {
                None => Err(ProcessError::UnknownDefinition(n.clone())),
                Some(d) if d.params.len() != args.len() => {
                    Err(ProcessError::Arity { name: n.clone(), expected: d.params.len(), found: args.len() })
                }
                Some(_) => Ok(()),
            },
        }
    }
}

/// Calls reachable without crossing a `next` or `unless`. `*P` may run `P`
/// immediately (delay 0), so it does not guard.
fn unguarded_calls<'a>(p: &'a Process, out: &mut BTreeSet<&'a str>) {
    match p {
        Process::Skip | Process::Tell(_) | Process::Next(_) | Process::Unless(..) => {}
        Process::Sum(bs) => bs.iter().for_each(|b| unguarded_calls(&b.body, out)),
        Process::Par(ps) => ps.iter().for_each(|p| unguarded_calls(p, out)),
        Process::Local(_, p) | Process::Star(p) | Process::Bang(p) => unguarded_calls(p, out),
        Process::Call(n, _) => {
            out.insert(n.as_str());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::parse_constraint;
    use alloc::string::ToString;
    use alloc::vec;

    fn c(s: &str) -> Constraint {
        parse_constraint(s).unwrap()
    }

    #[test]
    fn canonical_syntax() {
        let p = Process::par([
            Process::tell(c("a = 1")),
            Process::sum([(c("a = 1"), Process::tell(c("b = 1"))), (c("b = 1"), Process::Skip)]),
            Process::unless(c("e = 1"), Process::next(Process::call("W", [LinExpr::constant(2)]))),
            Process::bang(Process::star(Process::Skip)),
            Process::local(VarDecl::new("h", 0, 3), Process::tell(c("h = 2"))),
        ]);
        assert_eq!(
            p.to_string(),
            "tell(1*a + -1 = 0) || (when 1*a + -1 = 0 do tell(1*b + -1 = 0) + when 1*b + -1 = 0 do skip) || \
             (unless 1*e + -1 = 0 next (next W(2))) || (!(*skip)) || (local h:[0,3] in tell(1*h + -2 = 0))"
        );
    }

    #[test]
    fn par_flattens() {
        let p = Process::par([Process::Skip, Process::par([Process::tell(c("a = 1")), Process::Skip])]);
        assert_eq!(p, Process::tell(c("a = 1")));
    }

    #[test]
    fn unfold_substitutes_parameters() {
        let mut defs = DefTable::new();
        defs.insert(
            "Count",
            vec!["n".into()],
            Process::when(c("n > 0"), Process::next(Process::call("Count", [LinExpr::from_terms([(1, "n")], -1)]))),
        );
        defs.check().unwrap();
        let body = defs.unfold("Count", &[LinExpr::constant(2)]).unwrap();
        assert_eq!(body.to_string(), "when -2 < 0 do (next Count(1))");
        assert!(matches!(defs.unfold("Count", &[]), Err(ProcessError::Arity { .. })));
        assert!(matches!(defs.unfold("Nope", &[]), Err(ProcessError::UnknownDefinition(_))));
    }

    #[test]
    fn unguarded_recursion_rejected() {
        let mut defs = DefTable::new();
        defs.insert("P", vec![], Process::par([Process::tell(c("x = 1")), Process::call("Q", [])]));
        defs.insert("Q", vec![], Process::when(Constraint::True, Process::call("P", [])));
        let err = defs.check().unwrap_err();
        assert!(matches!(err, ProcessError::UnguardedRecursion(ref cyc) if cyc.len() == 3), "{err:?}");

        let mut ok = DefTable::new();
        ok.insert("P", vec![], Process::unless(c("x = 1"), Process::call("P", [])));
        ok.check().unwrap();

        let mut star = DefTable::new();
        star.insert("S", vec![], Process::star(Process::call("S", [])));
        assert!(star.check().is_err());
    }

    #[test]
    fn substitution_respects_binders() {
        let p = Process::par([
            Process::tell(c("x = 1")),
            Process::local(VarDecl::new("x", 0, 1), Process::tell(c("x = 0"))),
        ]);
        let mut m = BTreeMap::new();
        m.insert("x".to_string(), VarMap::Rename("y".into()));
        let q = p.substitute(&m);
        assert!(q.mentions("y"));
        assert_eq!(q.to_string(), "tell(1*y + -1 = 0) || (local x:[0,1] in tell(1*x = 0))");
    }
}
