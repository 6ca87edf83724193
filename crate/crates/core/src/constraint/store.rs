use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::expr::{Constraint, VarDecl};
use super::solver::{propagate, CCon, Dom, Problem};

/// Default cap on the product of domain sizes accepted by
/// [`Store::solutions`].
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("variable `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("enumeration too large: {size} assignments exceed cap {cap}")]
    EnumerationTooLarge { size: u128, cap: u64 },
}

/// Declarations shared by many stores (one per time unit).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarTable {
    decls: Vec<VarDecl>,
    index: BTreeMap<String, u32>,
}

impl VarTable {
    pub fn new(decls: impl IntoIterator<Item = VarDecl>) -> Result<Self, StoreError> {
        let mut table = VarTable { decls: Vec::new(), index: BTreeMap::new() };
        for d in decls {
            table.push(d)?;
        }
        Ok(table)
    }

    fn push(&mut self, d: VarDecl) -> Result<u32, StoreError> {
        if d.lo > d.hi {
            return Err(StoreError::EmptyDomain(d.name));
        }
        if self.index.contains_key(&d.name) {
            return Err(StoreError::DuplicateVariable(d.name));
        }
        let id = self.decls.len() as u32;
        self.index.insert(d.name.clone(), id);
        self.decls.push(d);
        Ok(id)
    }

    pub fn decls(&self) -> &[VarDecl] {
        &self.decls
    }

    pub fn get(&self, name: &str) -> Option<&VarDecl> {
        self.index.get(name).map(|&i| &self.decls[i as usize])
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }
}

/// Resolved variables of a constraint, used to ask whether the part of the
/// store it depends on has changed since some epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Watch {
    vars: Vec<u32>,
}

pub type Assignment = BTreeMap<String, i64>;

/// Finite-domain constraint store.
///
/// Telling narrows internal bounds by propagation and keeps the
/// consistency status exact (a backtracking search runs over the connected
/// part of the store touched by each tell). Entailment is decided exactly as
/// unsatisfiability of the store plus the negated constraint.
#[derive(Debug, Clone)]
pub struct Store {
    base: Arc<VarTable>,
    extra: VarTable,
    dom: Vec<Dom>,
    told: Vec<Constraint>,
    compiled: Vec<CCon>,
    settled: Vec<bool>,
    occurs: Vec<Vec<usize>>,
    parent: Vec<u32>,
    rank: Vec<u8>,
    comp_epoch: Vec<u64>,
    epoch: u64,
    consistent: bool,
    failed_at: u64,
}

impl Store {
    pub fn new(decls: impl IntoIterator<Item = VarDecl>) -> Result<Self, StoreError> {
        Ok(Store::with_table(Arc::new(VarTable::new(decls)?)))
    }

    pub fn with_table(base: Arc<VarTable>) -> Self {
        let n = base.len();
        Store {
            dom: base.decls().iter().map(|d| (d.lo, d.hi)).collect(),
            base,
            extra: VarTable { decls: Vec::new(), index: BTreeMap::new() },
            told: Vec::new(),
            compiled: Vec::new(),
            settled: Vec::new(),
            occurs: vec![Vec::new(); n],
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
            comp_epoch: vec![0; n],
            epoch: 0,
            consistent: true,
            failed_at: 0,
        }
    }

    pub fn table(&self) -> &Arc<VarTable> {
        &self.base
    }

    /// Adds a variable after construction (used for hidden local variables).
    pub fn declare(&mut self, decl: VarDecl) -> Result<(), StoreError> {
        if self.base.get(&decl.name).is_some() {
            return Err(StoreError::DuplicateVariable(decl.name));
        }
        let (lo, hi) = (decl.lo, decl.hi);
        self.extra.push(decl)?;
        let id = self.dom.len() as u32;
        self.dom.push((lo, hi));
        self.occurs.push(Vec::new());
        self.parent.push(id);
        self.rank.push(0);
        self.comp_epoch.push(0);
        Ok(())
    }

    pub fn decls(&self) -> impl Iterator<Item = &VarDecl> {
        self.base.decls().iter().chain(self.extra.decls().iter())
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.id(name).is_some()
    }

    pub fn told(&self) -> &[Constraint] {
        &self.told
    }

    /// Exact satisfiability of the told constraints within the declared
    /// domains.
    pub fn sat(&self) -> bool {
        self.consistent
    }

    pub fn is_consistent(&self) -> bool {
        self.consistent
    }

    /// Counter bumped by every tell.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Current (propagated) bounds of a variable.
    pub fn bounds(&self, name: &str) -> Option<(i64, i64)> {
        self.id(name).map(|i| self.dom[i as usize])
    }

    /// The value of a variable if propagation has fixed it.
    pub fn value(&self, name: &str) -> Option<i64> {
        self.bounds(name).and_then(|(l, h)| (l == h).then_some(l))
    }

    fn id(&self, name: &str) -> Option<u32> {
        self.base
            .index
            .get(name)
            .copied()
            .or_else(|| self.extra.index.get(name).map(|&i| i + self.base.len() as u32))
    }

    fn lower(&self, c: &Constraint) -> Result<CCon, StoreError> {
        Ok(match c {
            Constraint::True => CCon::True,
            Constraint::False => CCon::False,
            Constraint::Atom(a) => {
                let mut terms = Vec::with_capacity(a.expr.terms().len());
                for (coef, v) in a.expr.terms() {
                    let id = self.id(v).ok_or_else(|| StoreError::UnknownVariable(v.clone()))?;
                    terms.push((*coef, id));
                }
                CCon::Atom { terms, k: a.expr.constant_term(), rel: a.rel }
            }
            Constraint::And(a, b) => CCon::And(self.lower(a)?.into(), self.lower(b)?.into()),
            Constraint::Or(a, b) => CCon::Or(self.lower(a)?.into(), self.lower(b)?.into()),
        })
    }

    fn find(&self, mut v: u32) -> u32 {
        while self.parent[v as usize] != v {
            v = self.parent[v as usize];
        }
        v
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (hi, lo) = if self.rank[ra as usize] >= self.rank[rb as usize] { (ra, rb) } else { (rb, ra) };
        self.parent[lo as usize] = hi;
        if self.rank[hi as usize] == self.rank[lo as usize] {
            self.rank[hi as usize] += 1;
        }
        self.comp_epoch[hi as usize] = self.comp_epoch[hi as usize].max(self.comp_epoch[lo as usize]);
        hi
    }

    /// Adds `c` to the store.
    ///
    /// Inconsistent stores stay inconsistent. An undeclared variable leaves
    /// the store untouched and reports [`StoreError::UnknownVariable`].
    pub fn tell(&mut self, c: Constraint) -> Result<(), StoreError> {
        let cc = self.lower(&c)?;
        self.epoch += 1;
        let idx = self.compiled.len();
        let vars = cc.vars();
        if let Some(&first) = vars.first() {
            let mut root = self.find(first);
            for &v in &vars[1..] {
                root = self.union(root, v);
            }
            self.comp_epoch[root as usize] = self.epoch;
        }
        for &v in &vars {
            self.occurs[v as usize].push(idx);
        }
        self.told.push(c);
        self.compiled.push(cc);
        self.settled.push(false);
        if !self.consistent {
            return Ok(());
        }
        let mut changed = Vec::new();
        if propagate(&mut self.dom, &self.compiled, &self.occurs, &self.settled, [idx], &mut changed).is_err() {
            self.fail();
            return Ok(());
        }
        let mut seeds: BTreeSet<u32> = vars.into_iter().collect();
        seeds.extend(changed.iter().copied());
        for &v in &seeds {
            for &ci in &self.occurs[v as usize] {
                if !self.settled[ci] && self.compiled[ci].box_entailed(&self.dom) {
                    self.settled[ci] = true;
                }
            }
        }
        if !self.settled[idx] && self.compiled[idx].box_entailed(&self.dom) {
            self.settled[idx] = true;
        }
        if !self.component_sat(seeds.into_iter(), None) {
            self.fail();
        }
        Ok(())
    }

    /// Consuming form of [`Store::tell`].
    pub fn with(mut self, c: Constraint) -> Result<Self, StoreError> {
        self.tell(c)?;
        Ok(self)
    }

    fn fail(&mut self) {
        self.consistent = false;
        self.failed_at = self.epoch;
    }

    /// Satisfiability of the told constraints reachable from `seeds` (through
    /// constraints not already implied by the bounds), optionally with one
    /// extra constraint.
    fn component_sat(&self, seeds: impl Iterator<Item = u32>, extra: Option<&CCon>) -> bool {
        let mut local: BTreeMap<u32, u32> = BTreeMap::new();
        let mut order: Vec<u32> = Vec::new();
        let mut stack: Vec<u32> = Vec::new();
        let visit = |v: u32, local: &mut BTreeMap<u32, u32>, order: &mut Vec<u32>, stack: &mut Vec<u32>| {
            if let alloc::collections::btree_map::Entry::Vacant(e) = local.entry(v) {
                e.insert(order.len() as u32);
                order.push(v);
                stack.push(v);
            }
        };
        for v in seeds {
            visit(v, &mut local, &mut order, &mut stack);
        }
        if let Some(e) = extra {
            for v in e.vars() {
                visit(v, &mut local, &mut order, &mut stack);
            }
        }
        let mut included: BTreeSet<usize> = BTreeSet::new();
        while let Some(v) = stack.pop() {
            for &ci in &self.occurs[v as usize] {
                if self.settled[ci] || included.contains(&ci) || self.compiled[ci].box_entailed(&self.dom) {
                    continue;
                }
                included.insert(ci);
                for w in self.compiled[ci].vars() {
                    visit(w, &mut local, &mut order, &mut stack);
                }
            }
        }
        let map = |v: u32| local[&v];
        let mut cons: Vec<CCon> = included.iter().map(|&ci| self.compiled[ci].remap(&map)).collect();
        if let Some(e) = extra {
            cons.push(e.remap(&map));
        }
        if cons.is_empty() {
            return true;
        }
        let dom = order.iter().map(|&v| self.dom[v as usize]).collect();
        Problem { dom, cons }.solve().is_some()
    }

    /// True iff every solution of the store satisfies `c`; an inconsistent
    /// store entails everything.
    pub fn entails(&self, c: &Constraint) -> Result<bool, StoreError> {
        let cc = self.lower(c)?;
        if !self.consistent || cc.box_entailed(&self.dom) {
            return Ok(true);
        }
        let neg = cc.negate();
        let vars = cc.vars();
        if vars.iter().all(|&v| self.occurs[v as usize].iter().all(|&ci| self.settled[ci])) {
            // every told constraint on these variables holds on the whole box,
            // so they range freely over their bounds
            let map = |v: u32| vars.binary_search(&v).expect("own variable") as u32;
            if let [v] = vars[..] {
                let (lo, hi) = self.dom[v as usize];
                if hi - lo < 64 {
                    let neg = neg.remap(&map);
                    return Ok(!(lo..=hi).any(|x| neg.eval(&[x])));
                }
            }
            let dom = vars.iter().map(|&v| self.dom[v as usize]).collect();
            return Ok(Problem { dom, cons: vec![neg.remap(&map)] }.solve().is_none());
        }
        Ok(!self.component_sat(core::iter::empty(), Some(&neg)))
    }

    pub fn watch(&self, c: &Constraint) -> Result<Watch, StoreError> {
        Ok(Watch { vars: self.lower(c)?.vars() })
    }

    /// Whether anything an entailment query on the watched constraint depends
    /// on has been told after `epoch`.
    pub fn changed_since(&self, w: &Watch, epoch: u64) -> bool {
        if !self.consistent && self.failed_at > epoch {
            return true;
        }
        w.vars.iter().any(|&v| self.comp_epoch[self.find(v) as usize] > epoch)
    }

    /// Every satisfying assignment, by brute force over the declared domains
    /// (propagation is not consulted).
    pub fn solutions(&self) -> Result<Vec<Assignment>, StoreError> {
        self.solutions_capped(DEFAULT_ENUMERATION_CAP)
    }

    pub fn solutions_capped(&self, cap: u64) -> Result<Vec<Assignment>, StoreError> {
        let decls: Vec<&VarDecl> = self.decls().collect();
        let size = decls.iter().fold(1u128, |acc, d| acc.saturating_mul(d.size() as u128));
        if size > cap as u128 {
            return Err(StoreError::EnumerationTooLarge { size, cap });
        }
        let mut out = Vec::new();
        let mut values: Vec<i64> = decls.iter().map(|d| d.lo).collect();
        loop {
            if self.compiled.iter().all(|c| c.eval(&values)) {
                out.push(decls.iter().zip(&values).map(|(d, v)| (d.name.clone(), *v)).collect());
            }
            // odometer, last variable fastest
            let mut i = decls.len();
            loop {
                if i == 0 {
                    return Ok(out);
                }
                i -= 1;
                if values[i] < decls[i].hi {
                    values[i] += 1;
                    break;
                }
                values[i] = decls[i].lo;
            }
        }
    }
}

impl fmt::Display for Store {
    /// One declaration or told constraint per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in self.decls() {
            writeln!(f, "{d}")?;
        }
        for c in &self.told {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

impl Store {
    /// Canonical text dump (same as `Display`).
    pub fn dump(&self) -> String {
        self.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::parse::parse_constraint;

    fn c(s: &str) -> Constraint {
        parse_constraint(s).unwrap()
    }

    fn xs() -> Store {
        Store::new([VarDecl::new("x", 0, 5)]).unwrap()
    }

    #[test]
    fn tell_true_is_identity() {
        let s = xs();
        let t = s.clone().with(Constraint::True).unwrap();
        assert_eq!(s.solutions().unwrap(), t.solutions().unwrap());
    }

    #[test]
    fn tell_fixes_value() {
        let s = xs().with(c("x = 3")).unwrap();
        let sols = s.solutions().unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0]["x"], 3);
        assert_eq!(s.value("x"), Some(3));
    }

    #[test]
    fn contradiction_is_inconsistent() {
        let s = xs().with(c("x < 2")).unwrap().with(c("x > 3")).unwrap();
        assert!(!s.sat());
        assert!(s.entails(&c("x = 100")).unwrap());
        assert!(s.solutions().unwrap().is_empty());
    }

    #[test]
    fn sat_examples() {
        assert!(xs().sat());
        let s = Store::new([VarDecl::new("x", 0, 3), VarDecl::new("y", 0, 3)])
            .unwrap()
            .with(c("x + y = 5"))
            .unwrap()
            .with(c("x <= y"))
            .unwrap();
        assert!(s.sat());
        // propagation alone leaves both in [2,3]; search decides
        let s2 = s.with(c("x != 2")).unwrap().with(c("y != 2")).unwrap();
        assert!(!s2.sat());
    }

    #[test]
    fn entailment_examples() {
        assert!(xs().entails(&c("x >= 0")).unwrap());
        assert!(xs().with(c("x >= 3")).unwrap().entails(&c("x >= 1")).unwrap());
        assert!(!xs().entails(&c("x = 2")).unwrap());
    }

    #[test]
    fn entailment_needs_search_for_holes() {
        // 2x != 1 holds everywhere though 0 lies inside the range of 2x - 1
        let s = xs();
        assert!(s.entails(&c("2*x != 1")).unwrap());
        assert!(s.entails(&c("x = 0 \\/ x >= 1")).unwrap());
    }

    #[test]
    fn unknown_variable_rejected() {
        let mut s = xs();
        assert_eq!(s.tell(c("z = 1")), Err(StoreError::UnknownVariable("z".into())));
        assert!(s.told().is_empty());
        assert!(s.entails(&c("z = 1")).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let s = Store::new([VarDecl::new("x", 0, 1)]).unwrap();
        assert_eq!(s.solutions().unwrap().len(), 2);
        let s = Store::new([VarDecl::new("x", 0, 1), VarDecl::new("y", 0, 1)]).unwrap().with(c("x != y")).unwrap();
        assert_eq!(s.solutions().unwrap().len(), 2);
        let big = Store::new([VarDecl::new("a", 0, 999), VarDecl::new("b", 0, 999), VarDecl::new("c", 0, 1)]).unwrap();
        assert!(matches!(big.solutions(), Err(StoreError::EnumerationTooLarge { .. })));
    }

    #[test]
    fn watch_tracks_components() {
        let mut s = Store::new([VarDecl::new("a", 0, 1), VarDecl::new("b", 0, 1), VarDecl::new("z", 0, 1)]).unwrap();
        let w = s.watch(&c("a = 1")).unwrap();
        let e0 = s.epoch();
        s.tell(c("z = 1")).unwrap();
        assert!(!s.changed_since(&w, e0));
        s.tell(c("a = b")).unwrap();
        let e1 = s.epoch();
        assert!(s.changed_since(&w, e0));
        s.tell(c("b = 1")).unwrap();
        assert!(s.changed_since(&w, e1));
        assert!(s.entails(&c("a = 1")).unwrap());
    }

    #[test]
    fn locals_can_be_declared() {
        let mut s = xs();
        s.declare(VarDecl::new("h#0", 0, 2)).unwrap();
        s.tell(c("h#0 = x")).unwrap();
        s.tell(c("x = 2")).unwrap();
        assert!(s.entails(&c("h#0 = 2")).unwrap());
        assert!(s.declare(VarDecl::new("x", 0, 1)).is_err());
    }

    #[test]
    fn dump_format() {
        let s = Store::new([VarDecl::new("x", 0, 5), VarDecl::new("y", 0, 5)]).unwrap().with(c("3*x - y + 2 <= 0")).unwrap();
        assert_eq!(s.dump(), "x in [0,5]\ny in [0,5]\n3*x + -1*y + 2 <= 0\n");
    }
}
