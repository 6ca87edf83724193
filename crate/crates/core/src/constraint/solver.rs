//! Index-based constraints, bounds propagation and backtracking search.

use alloc::boxed::Box;
use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::expr::Rel;

pub(crate) type Dom = (i64, i64);

#[derive(Debug)]
pub(crate) struct Wipeout;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum CCon {
    True,
    False,
    Atom { terms: Vec<(i64, u32)>, k: i64, rel: Rel },
    And(Box<CCon>, Box<CCon>),
    Or(Box<CCon>, Box<CCon>),
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

fn clamp_i64(x: i128) -> i64 {
    x.clamp(i64::MIN as i128, i64::MAX as i128) as i64
}

fn range(terms: &[(i64, u32)], k: i64, dom: &[Dom]) -> (i128, i128) {
    let mut lo = k as i128;
    let mut hi = k as i128;
    for &(a, v) in terms {
        let (l, h) = dom[v as usize];
        let (x, y) = (a as i128 * l as i128, a as i128 * h as i128);
        lo += x.min(y);
        hi += x.max(y);
    }
    (lo, hi)
}

fn set_dom(dom: &mut [Dom], v: u32, lo: i128, hi: i128, changed: &mut Vec<u32>) -> Result<(), Wipeout> {
    let (l, h) = dom[v as usize];
    let nl = clamp_i64(lo.max(l as i128));
    let nh = clamp_i64(hi.min(h as i128));
    if nl > nh {
        return Err(Wipeout);
    }
    if (nl, nh) != (l, h) {
        dom[v as usize] = (nl, nh);
        changed.push(v);
    }
    Ok(())
}

/// Bounds reasoning for `sum + k <= 0`.
fn revise_le(terms: &[(i64, u32)], k: i128, dom: &mut [Dom], changed: &mut Vec<u32>) -> Result<(), Wipeout> {
    let mut min_sum = k;
    for &(a, v) in terms {
        let (l, h) = dom[v as usize];
        min_sum += if a > 0 { a as i128 * l as i128 } else { a as i128 * h as i128 };
    }
    if min_sum > 0 {
        return Err(Wipeout);
    }
    for &(a, v) in terms {
        let (l, h) = dom[v as usize];
        let own = if a > 0 { a as i128 * l as i128 } else { a as i128 * h as i128 };
        // a * x <= -(min_sum - own)
        let room = own - min_sum;
        if a > 0 {
            set_dom(dom, v, i128::MIN, floor_div(room, a as i128), changed)?;
        } else {
            set_dom(dom, v, ceil_div(room, a as i128), i128::MAX, changed)?;
        }
    }
    Ok(())
}

impl CCon {
    pub(crate) fn collect_vars(&self, out: &mut Vec<u32>) {
        match self {
            CCon::True | CCon::False => {}
            CCon::Atom { terms, .. } => out.extend(terms.iter().map(|t| t.1)),
            CCon::And(a, b) | CCon::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub(crate) fn vars(&self) -> Vec<u32> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    pub(crate) fn negate(&self) -> CCon {
        match self {
            CCon::True => CCon::False,
            CCon::False => CCon::True,
            CCon::Atom { terms, k, rel } => {
                let flipped = || terms.iter().map(|&(a, v)| (-a, v)).collect();
                match rel {
                    Rel::Eq => CCon::Atom { terms: terms.clone(), k: *k, rel: Rel::Ne },
                    Rel::Ne => CCon::Atom { terms: terms.clone(), k: *k, rel: Rel::Eq },
                    Rel::Lt => CCon::Atom { terms: flipped(), k: -k, rel: Rel::Le },
                    Rel::Le => CCon::Atom { terms: flipped(), k: -k, rel: Rel::Lt },
                }
            }
            CCon::And(a, b) => CCon::Or(Box::new(a.negate()), Box::new(b.negate())),
            CCon::Or(a, b) => CCon::And(Box::new(a.negate()), Box::new(b.negate())),
        }
    }

    pub(crate) fn remap(&self, map: &impl Fn(u32) -> u32) -> CCon {
        match self {
            CCon::True => CCon::True,
            CCon::False => CCon::False,
            CCon::Atom { terms, k, rel } => CCon::Atom {
                terms: terms.iter().map(|&(a, v)| (a, map(v))).collect(),
                k: *k,
                rel: *rel,
            },
            CCon::And(a, b) => CCon::And(Box::new(a.remap(map)), Box::new(b.remap(map))),
            CCon::Or(a, b) => CCon::Or(Box::new(a.remap(map)), Box::new(b.remap(map))),
        }
    }

    /// Every point of the box satisfies the constraint (sound, not complete
    /// for `!=` and disjunctions).
    pub(crate) fn box_entailed(&self, dom: &[Dom]) -> bool {
        match self {
            CCon::True => true,
            CCon::False => false,
            CCon::Atom { terms, k, rel } => {
                let (lo, hi) = range(terms, *k, dom);
                match rel {
                    Rel::Le => hi <= 0,
                    Rel::Lt => hi < 0,
                    Rel::Eq => lo == 0 && hi == 0,
                    Rel::Ne => lo > 0 || hi < 0,
                }
            }
            CCon::And(a, b) => a.box_entailed(dom) && b.box_entailed(dom),
            CCon::Or(a, b) => a.box_entailed(dom) || b.box_entailed(dom),
        }
    }

    pub(crate) fn eval(&self, values: &[i64]) -> bool {
        match self {
            CCon::True => true,
            CCon::False => false,
            CCon::Atom { terms, k, rel } => {
                let v = terms.iter().fold(*k as i128, |acc, &(a, x)| acc + a as i128 * values[x as usize] as i128);
                rel.holds(v)
            }
            CCon::And(a, b) => a.eval(values) && b.eval(values),
            CCon::Or(a, b) => a.eval(values) || b.eval(values),
        }
    }

    pub(crate) fn revise(&self, dom: &mut [Dom], changed: &mut Vec<u32>) -> Result<(), Wipeout> {
        match self {
            CCon::True => Ok(()),
            CCon::False => Err(Wipeout),
            CCon::Atom { terms, k, rel } => match rel {
                Rel::Le => revise_le(terms, *k as i128, dom, changed),
                Rel::Lt => revise_le(terms, *k as i128 + 1, dom, changed),
                Rel::Eq => {
                    revise_le(terms, *k as i128, dom, changed)?;
                    let neg: Vec<(i64, u32)> = terms.iter().map(|&(a, v)| (-a, v)).collect();
                    revise_le(&neg, -(*k as i128), dom, changed)
                }
                Rel::Ne => {
                    let mut open = None;
                    let mut rest = *k as i128;
                    for &(a, v) in terms {
                        let (l, h) = dom[v as usize];
                        if l == h {
                            rest += a as i128 * l as i128;
                        } else if open.is_some() {
                            return Ok(());
                        } else {
                            open = Some((a, v));
                        }
                    }
                    match open {
                        None if rest == 0 => Err(Wipeout),
                        None => Ok(()),
                        Some((a, v)) => {
                            let a = a as i128;
                            if rest % a != 0 {
                                return Ok(());
                            }
                            let banned = -rest / a;
                            let (l, h) = dom[v as usize];
                            if banned == l as i128 {
                                set_dom(dom, v, banned + 1, i128::MAX, changed)
                            } else if banned == h as i128 {
                                set_dom(dom, v, i128::MIN, banned - 1, changed)
                            } else {
                                Ok(())
                            }
                        }
                    }
                }
            },
            CCon::And(a, b) => {
                a.revise(dom, changed)?;
                b.revise(dom, changed)
            }
            CCon::Or(a, b) => {
                let mut left = dom.to_vec();
                let mut right = dom.to_vec();
                let mut scratch = Vec::new();
                let left_ok = a.revise(&mut left, &mut scratch).is_ok();
                let right_ok = b.revise(&mut right, &mut scratch).is_ok();
                match (left_ok, right_ok) {
                    (false, false) => Err(Wipeout),
                    (true, false) => copy_changes(dom, &left, &self.vars(), changed),
                    (false, true) => copy_changes(dom, &right, &self.vars(), changed),
                    (true, true) => {
                        for v in self.vars() {
                            let (l1, h1) = left[v as usize];
                            let (l2, h2) = right[v as usize];
                            set_dom(dom, v, l1.min(l2) as i128, h1.max(h2) as i128, changed)?;
                        }
                        Ok(())
                    }
                }
            }
        }
    }
}

fn copy_changes(dom: &mut [Dom], from: &[Dom], vars: &[u32], changed: &mut Vec<u32>) -> Result<(), Wipeout> {
    for &v in vars {
        let (l, h) = from[v as usize];
        set_dom(dom, v, l as i128, h as i128, changed)?;
    }
    Ok(())
}

/// Queue-driven propagation to a fixpoint. `skip[i]` marks constraints that
/// can no longer narrow anything.
pub(crate) fn propagate(
    dom: &mut [Dom],
    cons: &[CCon],
    occurs: &[Vec<usize>],
    skip: &[bool],
    seeds: impl IntoIterator<Item = usize>,
    changed_out: &mut Vec<u32>,
) -> Result<(), Wipeout> {
    let mut queued = vec![false; cons.len()];
    let mut queue = VecDeque::new();
    for ci in seeds {
        if !queued[ci] && !skip.get(ci).copied().unwrap_or(false) {
            queued[ci] = true;
            queue.push_back(ci);
        }
    }
    let mut changed = Vec::new();
    while let Some(ci) = queue.pop_front() {
        queued[ci] = false;
        changed.clear();
        cons[ci].revise(dom, &mut changed)?;
        for &v in &changed {
            changed_out.push(v);
            for &cj in &occurs[v as usize] {
                if !queued[cj] && !skip.get(cj).copied().unwrap_or(false) {
                    queued[cj] = true;
                    queue.push_back(cj);
                }
            }
        }
    }
    Ok(())
}

/// A self-contained satisfaction problem over variables `0..dom.len()`.
pub(crate) struct Problem {
    pub dom: Vec<Dom>,
    pub cons: Vec<CCon>,
}

impl Problem {
    /// First solution in search order: smallest domain first (lowest index on
    /// ties), values ascending.
    pub(crate) fn solve(&self) -> Option<Vec<i64>> {
        let mut occurs = vec![Vec::new(); self.dom.len()];
        for (ci, c) in self.cons.iter().enumerate() {
            for v in c.vars() {
                occurs[v as usize].push(ci);
            }
        }
        let mut dom = self.dom.clone();
        let mut sink = Vec::new();
        propagate(&mut dom, &self.cons, &occurs, &[], 0..self.cons.len(), &mut sink).ok()?;
        self.dfs(dom, &occurs)
    }

    fn dfs(&self, dom: Vec<Dom>, occurs: &[Vec<usize>]) -> Option<Vec<i64>> {
        let pick = dom
            .iter()
            .enumerate()
            .filter(|(_, (l, h))| l < h)
            .min_by_key(|(i, (l, h))| ((*h as i128 - *l as i128), *i))
            .map(|(i, _)| i);
        let Some(v) = pick else {
            let values: Vec<i64> = dom.iter().map(|d| d.0).collect();
            return self.cons.iter().all(|c| c.eval(&values)).then_some(values);
        };
        let (lo, hi) = dom[v];
        let mut sink = Vec::new();
        let mut value = lo;
        loop {
            let mut next = dom.clone();
            next[v] = (value, value);
            if propagate(&mut next, &self.cons, occurs, &[], occurs[v].iter().copied(), &mut sink).is_ok() {
                if let Some(sol) = self.dfs(next, occurs) {
                    return Some(sol);
                }
            }
            if value == hi {
                return None;
            }
            value += 1;
        }
    }
}
