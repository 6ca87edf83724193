use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use crate::constraint::{Constraint, Store, StoreError};

/// Bounded LTL over entailment atoms. `always`, `eventually` and `until`
/// with bound `k` look at the `k` positions starting at the current one.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase", deny_unknown_fields))]
pub enum Formula {
    Atom(Constraint),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Always { bound: u32, formula: Box<Formula> },
    Eventually { bound: u32, formula: Box<Formula> },
    Until { bound: u32, left: Box<Formula>, right: Box<Formula> },
}

impl Formula {
    pub fn atom(c: Constraint) -> Self {
        Formula::Atom(c)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn next_n(n: u32, f: Formula) -> Self {
        (0..n).fold(f, |acc, _| Formula::next(acc))
    }

    pub fn always(bound: u32, f: Formula) -> Self {
        Formula::Always { bound, formula: Box::new(f) }
    }

    pub fn eventually(bound: u32, f: Formula) -> Self {
        Formula::Eventually { bound, formula: Box::new(f) }
    }

    pub fn until(bound: u32, left: Formula, right: Formula) -> Self {
        Formula::Until { bound, left: Box::new(left), right: Box::new(right) }
    }

    /// Number of trace positions needed to decide the formula at position 0.
    pub fn depth(&self) -> u32 {
        match self {
            Formula::Atom(_) => 1,
            Formula::Not(f) => f.depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => a.depth().max(b.depth()),
            Formula::Next(f) => 1 + f.depth(),
            Formula::Always { bound, formula } | Formula::Eventually { bound, formula } => {
                bound.saturating_sub(1) + formula.depth()
            }
            Formula::Until { bound, left, right } => bound.saturating_sub(1) + left.depth().max(right.depth()),
        }
    }

    pub fn atoms(&self) -> Vec<&Constraint> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Constraint>) {
        match self {
            Formula::Atom(c) => out.push(c),
            Formula::Not(f) | Formula::Next(f) => f.collect_atoms(out),
            Formula::Always { formula, .. } | Formula::Eventually { formula, .. } => formula.collect_atoms(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            Formula::Until { left, right, .. } => {
                left.collect_atoms(out);
                right.collect_atoms(out);
            }
        }
    }

    /// Direct evaluation at position `i` of a finite trace of stores.
    /// Positions past the end make atoms false.
    pub fn holds_at(&self, trace: &[Store], i: usize) -> Result<bool, StoreError> {
        Ok(match self {
            Formula::Atom(c) => match trace.get(i) {
                Some(s) => s.entails(c)?,
                None => false,
            },
            Formula::Not(f) => !f.holds_at(trace, i)?,
            Formula::And(a, b) => a.holds_at(trace, i)? && b.holds_at(trace, i)?,
            Formula::Or(a, b) => a.holds_at(trace, i)? || b.holds_at(trace, i)?,
            Formula::Implies(a, b) => !a.holds_at(trace, i)? || b.holds_at(trace, i)?,
            Formula::Next(f) => f.holds_at(trace, i + 1)?,
            Formula::Always { bound, formula } => {
                for j in i..i + *bound as usize {
                    if !formula.holds_at(trace, j)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Eventually { bound, formula } => {
                for j in i..i + *bound as usize {
                    if formula.holds_at(trace, j)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Until { bound, left, right } => {
                for j in i..i + *bound as usize {
                    if right.holds_at(trace, j)? {
                        return Ok(true);
                    }
                    if !left.holds_at(trace, j)? {
                        return Ok(false);
                    }
                }
                false
            }
        })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(c) => write!(f, "[{c}]"),
            Formula::Not(a) => write!(f, "!{a}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::Next(a) => write!(f, "X {a}"),
            Formula::Always { bound, formula } => write!(f, "G<={bound} {formula}"),
            Formula::Eventually { bound, formula } => write!(f, "F<={bound} {formula}"),
            Formula::Until { bound, left, right } => write!(f, "({left} U<={bound} {right})"),
        }
    }
}

/// Negation normal form with bounded release, the representation that is
/// progressed through a trace.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Nf {
    True,
    False,
    Lit(Constraint, bool),
    And(Box<Nf>, Box<Nf>),
    Or(Box<Nf>, Box<Nf>),
    Next(Box<Nf>),
    G(u32, Box<Nf>),
    F(u32, Box<Nf>),
    U(u32, Box<Nf>, Box<Nf>),
    R(u32, Box<Nf>, Box<Nf>),
}

fn and(a: Nf, b: Nf) -> Nf {
    match (a, b) {
        (Nf::False, _) | (_, Nf::False) => Nf::False,
        (Nf::True, x) | (x, Nf::True) => x,
        (a, b) if a == b => a,
        (a, b) => Nf::And(Box::new(a), Box::new(b)),
    }
}

fn or(a: Nf, b: Nf) -> Nf {
    match (a, b) {
        (Nf::True, _) | (_, Nf::True) => Nf::True,
        (Nf::False, x) | (x, Nf::False) => x,
        (a, b) if a == b => a,
        (a, b) => Nf::Or(Box::new(a), Box::new(b)),
    }
}

impl Nf {
    pub(crate) fn from_formula(f: &Formula, neg: bool) -> Nf {
        let b = |f: &Formula, neg| Box::new(Nf::from_formula(f, neg));
        match (f, neg) {
            (Formula::Atom(c), _) => Nf::Lit(c.clone(), !neg),
            (Formula::Not(a), _) => Nf::from_formula(a, !neg),
            (Formula::And(x, y), false) => and(Nf::from_formula(x, false), Nf::from_formula(y, false)),
            (Formula::And(x, y), true) => or(Nf::from_formula(x, true), Nf::from_formula(y, true)),
            (Formula::Or(x, y), false) => or(Nf::from_formula(x, false), Nf::from_formula(y, false)),
            (Formula::Or(x, y), true) => and(Nf::from_formula(x, true), Nf::from_formula(y, true)),
            (Formula::Implies(x, y), false) => or(Nf::from_formula(x, true), Nf::from_formula(y, false)),
            (Formula::Implies(x, y), true) => and(Nf::from_formula(x, false), Nf::from_formula(y, true)),
            (Formula::Next(a), _) => Nf::Next(b(a, neg)),
            (Formula::Always { bound, formula }, false) => Nf::G(*bound, b(formula, false)).normal(),
            (Formula::Always { bound, formula }, true) => Nf::F(*bound, b(formula, true)).normal(),
            (Formula::Eventually { bound, formula }, false) => Nf::F(*bound, b(formula, false)).normal(),
            (Formula::Eventually { bound, formula }, true) => Nf::G(*bound, b(formula, true)).normal(),
            (Formula::Until { bound, left, right }, false) => Nf::U(*bound, b(left, false), b(right, false)).normal(),
            (Formula::Until { bound, left, right }, true) => Nf::R(*bound, b(left, true), b(right, true)).normal(),
        }
    }

    /// Zero-bound operators are constants.
    fn normal(self) -> Nf {
        match self {
            Nf::G(0, _) | Nf::R(0, ..) => Nf::True,
            Nf::F(0, _) | Nf::U(0, ..) => Nf::False,
            x => x,
        }
    }

    /// Obligation left for the next position after observing `store`.
    pub(crate) fn progress(&self, store: &Store) -> Result<Nf, StoreError> {
        Ok(match self {
            Nf::True => Nf::True,
            Nf::False => Nf::False,
            Nf::Lit(c, pos) => {
                if store.entails(c)? == *pos {
                    Nf::True
                } else {
                    Nf::False
                }
            }
            Nf::And(a, b) => {
                let pa = a.progress(store)?;
                if pa == Nf::False {
                    return Ok(Nf::False);
                }
                and(pa, b.progress(store)?)
            }
            Nf::Or(a, b) => {
                let pa = a.progress(store)?;
                if pa == Nf::True {
                    return Ok(Nf::True);
                }
                or(pa, b.progress(store)?)
            }
            Nf::Next(a) => (**a).clone(),
            Nf::G(k, a) => and(a.progress(store)?, Nf::G(k - 1, a.clone()).normal()),
            Nf::F(k, a) => or(a.progress(store)?, Nf::F(k - 1, a.clone()).normal()),
            Nf::U(k, l, r) => {
                let rest = and(l.progress(store)?, Nf::U(k - 1, l.clone(), r.clone()).normal());
                or(r.progress(store)?, rest)
            }
            Nf::R(k, l, r) => {
                let rest = or(l.progress(store)?, Nf::R(k - 1, l.clone(), r.clone()).normal());
                and(r.progress(store)?, rest)
            }
        })
    }

    /// Value of a residual once the trace has ended.
    pub(crate) fn at_end(&self) -> bool {
        match self {
            Nf::True | Nf::G(..) | Nf::R(..) => true,
            Nf::False | Nf::Lit(..) | Nf::F(..) | Nf::U(..) | Nf::Next(_) => false,
            Nf::And(a, b) => a.at_end() && b.at_end(),
            Nf::Or(a, b) => a.at_end() || b.at_end(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{parse_constraint, VarDecl};
    use alloc::vec;

    fn store(x: i64) -> Store {
        Store::new([VarDecl::new("x", 0, 9)]).unwrap().with(Constraint::eq("x", x)).unwrap()
    }

    fn a(s: &str) -> Formula {
        Formula::atom(parse_constraint(s).unwrap())
    }

    fn progress_all(f: &Formula, neg: bool, trace: &[Store]) -> bool {
        let mut nf = Nf::from_formula(f, neg);
        for s in trace {
            nf = nf.progress(s).unwrap();
        }
        nf.at_end()
    }

    #[test]
    fn depth_rules() {
        assert_eq!(a("x = 1").depth(), 1);
        let scenario = Formula::always(19, Formula::implies(a("x = 1"), Formula::next_n(10, Formula::always(4, a("x = 2")))));
        assert_eq!(scenario.depth(), 32);
    }

    #[test]
    fn progression_matches_direct_evaluation() {
        let trace: Vec<Store> = [0, 1, 2, 2, 3, 1].iter().map(|&v| store(v)).collect();
        let fs = vec![
            Formula::always(6, a("x <= 3")),
            Formula::always(6, a("x <= 2")),
            Formula::eventually(3, a("x = 2")),
            Formula::eventually(2, a("x = 2")),
            Formula::until(6, a("x < 2"), a("x = 2")),
            Formula::until(2, a("x < 2"), a("x = 2")),
            Formula::until(6, a("x = 0"), a("x = 2")),
            Formula::implies(a("x = 0"), Formula::next(a("x = 1"))),
            Formula::always(5, Formula::implies(a("x = 2"), Formula::next(a("x >= 2")))),
            Formula::always(3, Formula::or(a("x = 1"), Formula::eventually(2, a("x = 2")))),
        ];
        for f in &fs {
            let direct = f.holds_at(&trace, 0).unwrap();
            assert_eq!(progress_all(f, false, &trace), direct, "{f}");
            assert_eq!(progress_all(f, true, &trace), !direct, "not {f}");
        }
    }
}
