use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// A finite-domain integer variable with inclusive bounds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct VarDecl {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        VarDecl { name: name.into(), lo, hi }
    }

    /// Boolean signal variable, domain `{0, 1}`.
    pub fn signal(name: impl Into<String>) -> Self {
        VarDecl::new(name, 0, 1)
    }

    pub fn size(&self) -> u64 {
        if self.hi < self.lo {
            0
        } else {
            (self.hi as i128 - self.lo as i128 + 1) as u64
        }
    }
}

impl fmt::Display for VarDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in [{},{}]", self.name, self.lo, self.hi)
    }
}

/// Comparison of a linear expression against zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Eq,
    Ne,
    Lt,
    Le,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Ne => "!=",
            Rel::Lt => "<",
            Rel::Le => "<=",
        }
    }

    pub fn holds(self, value: i128) -> bool {
        match self {
            Rel::Eq => value == 0,
            Rel::Ne => value != 0,
            Rel::Lt => value < 0,
            Rel::Le => value <= 0,
        }
    }
}

/// What a variable becomes under [`LinExpr::map_vars`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VarMap {
    Keep,
    Rename(String),
    Value(i64),
}

/// `sum(coef * var) + constant`, kept sorted by variable name with no zero
/// coefficients and no repeated variable.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinExpr {
    terms: Vec<(i64, String)>,
    constant: i64,
}

impl LinExpr {
    pub fn constant(k: i64) -> Self {
        LinExpr { terms: Vec::new(), constant: k }
    }

    pub fn var(name: impl Into<String>) -> Self {
        LinExpr::term(1, name)
    }

    pub fn term(coef: i64, name: impl Into<String>) -> Self {
        LinExpr::from_terms([(coef, name.into())], 0)
    }

    pub fn from_terms<I, S>(terms: I, constant: i64) -> Self
    where
        I: IntoIterator<Item = (i64, S)>,
        S: Into<String>,
    {
        let mut out = LinExpr { terms: terms.into_iter().map(|(c, v)| (c, v.into())).collect(), constant };
        out.normalize();
        out
    }

    fn normalize(&mut self) {
        self.terms.sort_by(|a, b| a.1.cmp(&b.1));
        let mut merged: Vec<(i64, String)> = Vec::with_capacity(self.terms.len());
        for (c, v) in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.1 == v => last.0 += c,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|(c, _)| *c != 0);
        self.terms = merged;
    }

    pub fn terms(&self) -> &[(i64, String)] {
        &self.terms
    }

    pub fn constant_term(&self) -> i64 {
        self.constant
    }

    pub fn is_ground(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn plus(&self, other: &LinExpr) -> LinExpr {
        let mut out = LinExpr {
            terms: self.terms.iter().chain(other.terms.iter()).cloned().collect(),
            constant: self.constant + other.constant,
        };
        out.normalize();
        out
    }

    pub fn minus(&self, other: &LinExpr) -> LinExpr {
        self.plus(&other.scaled(-1))
    }

    pub fn add_constant(&self, k: i64) -> LinExpr {
        LinExpr { terms: self.terms.clone(), constant: self.constant + k }
    }

    pub fn scaled(&self, k: i64) -> LinExpr {
        let mut out = LinExpr {
            terms: self.terms.iter().map(|(c, v)| (c * k, v.clone())).collect(),
            constant: self.constant * k,
        };
        out.normalize();
        out
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|(_, v)| v.as_str())
    }

    pub fn eval(&self, value: &impl Fn(&str) -> Option<i64>) -> Option<i128> {
        let mut total = self.constant as i128;
        for (c, v) in &self.terms {
            total += *c as i128 * value(v)? as i128;
        }
        Some(total)
    }

    pub fn map_vars(&self, f: &mut impl FnMut(&str) -> VarMap) -> LinExpr {
        let mut out = LinExpr { terms: Vec::with_capacity(self.terms.len()), constant: self.constant };
        let mut renamed = false;
        for (c, v) in &self.terms {
            match f(v) {
                VarMap::Keep => out.terms.push((*c, v.clone())),
                VarMap::Rename(to) => {
                    renamed = true;
                    out.terms.push((*c, to));
                }
                VarMap::Value(x) => out.constant += c * x,
            }
        }
        if renamed {
            out.normalize();
        }
        out
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "{}", self.constant);
        }
        for (i, (c, v)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c}*{v}")?;
        }
        if self.constant != 0 {
            write!(f, " + {}", self.constant)?;
        }
        Ok(())
    }
}

/// `expr rel 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub expr: LinExpr,
    pub rel: Rel,
}

/// Constraint language: linear atoms closed under conjunction, disjunction
/// and negation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    True,
    False,
    Atom(Atom),
    And(Box<Constraint>, Box<Constraint>),
    Or(Box<Constraint>, Box<Constraint>),
}

impl Constraint {
    pub fn atom(expr: LinExpr, rel: Rel) -> Self {
        Constraint::Atom(Atom { expr, rel })
    }

    /// `lhs rel rhs`, where `rel` is one of `=`, `!=`, `<`, `<=`, `>`, `>=`.
    ///
    /// Panics on any other operator string.
    pub fn cmp(lhs: LinExpr, op: &str, rhs: LinExpr) -> Self {
        match op {
            "=" | "==" => Constraint::atom(lhs.minus(&rhs), Rel::Eq),
            "!=" => Constraint::atom(lhs.minus(&rhs), Rel::Ne),
            "<" => Constraint::atom(lhs.minus(&rhs), Rel::Lt),
            "<=" => Constraint::atom(lhs.minus(&rhs), Rel::Le),
            ">" => Constraint::atom(rhs.minus(&lhs), Rel::Lt),
            ">=" => Constraint::atom(rhs.minus(&lhs), Rel::Le),
            _ => panic!("unknown comparison operator {op:?}"),
        }
    }

    /// `var = value`.
    pub fn eq(var: &str, value: i64) -> Self {
        Constraint::atom(LinExpr::from_terms([(1, var)], -value), Rel::Eq)
    }

    pub fn and(a: Constraint, b: Constraint) -> Self {
        match (a, b) {
            (Constraint::True, c) | (c, Constraint::True) => c,
            (a, b) => Constraint::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: Constraint, b: Constraint) -> Self {
        match (a, b) {
            (Constraint::False, c) | (c, Constraint::False) => c,
            (a, b) => Constraint::Or(Box::new(a), Box::new(b)),
        }
    }

    /// Right-nested conjunction; `True` for an empty iterator.
    pub fn all(items: impl IntoIterator<Item = Constraint>) -> Self {
        let items: Vec<_> = items.into_iter().collect();
        items.into_iter().rev().fold(Constraint::True, |acc, c| Constraint::and(c, acc))
    }

    /// Right-nested disjunction; `False` for an empty iterator.
    pub fn any(items: impl IntoIterator<Item = Constraint>) -> Self {
        let items: Vec<_> = items.into_iter().collect();
        items.into_iter().rev().fold(Constraint::False, |acc, c| Constraint::or(c, acc))
    }

    pub fn negate(&self) -> Constraint {
        match self {
            Constraint::True => Constraint::False,
            Constraint::False => Constraint::True,
            Constraint::Atom(Atom { expr, rel }) => match rel {
                Rel::Eq => Constraint::atom(expr.clone(), Rel::Ne),
                Rel::Ne => Constraint::atom(expr.clone(), Rel::Eq),
                // e < 0  <=>  not (-e <= 0)
                Rel::Lt => Constraint::atom(expr.scaled(-1), Rel::Le),
                Rel::Le => Constraint::atom(expr.scaled(-1), Rel::Lt),
            },
            Constraint::And(a, b) => Constraint::Or(Box::new(a.negate()), Box::new(b.negate())),
            Constraint::Or(a, b) => Constraint::And(Box::new(a.negate()), Box::new(b.negate())),
        }
    }

    /// Sorted, duplicate-free variable names.
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Constraint::True | Constraint::False => {}
            Constraint::Atom(a) => out.extend(a.expr.vars()),
            Constraint::And(a, b) | Constraint::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Constraint::True | Constraint::False => true,
            Constraint::Atom(a) => a.expr.is_ground(),
            Constraint::And(a, b) | Constraint::Or(a, b) => a.is_ground() && b.is_ground(),
        }
    }

    /// Truth value under an assignment; `None` if a variable is unassigned.
    pub fn eval(&self, value: &impl Fn(&str) -> Option<i64>) -> Option<bool> {
        Some(match self {
            Constraint::True => true,
            Constraint::False => false,
            Constraint::Atom(a) => a.rel.holds(a.expr.eval(value)?),
            Constraint::And(a, b) => a.eval(value)? && b.eval(value)?,
            Constraint::Or(a, b) => a.eval(value)? || b.eval(value)?,
        })
    }

    pub fn map_vars(&self, f: &mut impl FnMut(&str) -> VarMap) -> Constraint {
        match self {
            Constraint::True => Constraint::True,
            Constraint::False => Constraint::False,
            Constraint::Atom(a) => Constraint::atom(a.expr.map_vars(f), a.rel),
            Constraint::And(a, b) => Constraint::And(Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
            Constraint::Or(a, b) => Constraint::Or(Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::True => f.write_str("true"),
            Constraint::False => f.write_str("false"),
            Constraint::Atom(a) => write!(f, "{} {} 0", a.expr, a.rel.symbol()),
            Constraint::And(a, b) => write!(f, "({a} /\\ {b})"),
            Constraint::Or(a, b) => write!(f, "({a} \\/ {b})"),
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Constraint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Constraint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = <alloc::borrow::Cow<'de, str> as serde::Deserialize>::deserialize(d)?;
        super::parse::parse_constraint(&text).map_err(serde::de::Error::custom)
    }
}
