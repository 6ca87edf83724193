//! The interactive-score model: temporal objects, temporal relations,
//! interaction points, conditional branches and global constraints.

mod validate;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::constraint::{Constraint, VarDecl};

pub use validate::{validate, DiagKind, Diagnostic};
pub(crate) use validate::duration_constraints;

/// Durations and delays are counted in time units.
pub type Tu = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase", deny_unknown_fields))]
pub enum Duration {
    Fixed(Tu),
    Flexible { dmin: Tu, dmax: Tu },
}

impl Duration {
    pub fn min(&self) -> Tu {
        match *self {
            Duration::Fixed(d) => d,
            Duration::Flexible { dmin, .. } => dmin,
        }
    }

    pub fn max(&self) -> Tu {
        match *self {
            Duration::Fixed(d) => d,
            Duration::Flexible { dmax, .. } => dmax,
        }
    }

    pub fn is_flexible(&self) -> bool {
        matches!(self, Duration::Flexible { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MessageKind {
    Start,
    Stop,
    Param,
}

/// Control message sent to the external media subsystems.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ControlMessage {
    pub kind: MessageKind,
    pub object: String,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub target: Option<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub value: Option<i64>,
}

impl ControlMessage {
    pub fn start(object: impl Into<String>) -> Self {
        ControlMessage { kind: MessageKind::Start, object: object.into(), target: None, value: None }
    }

    pub fn stop(object: impl Into<String>) -> Self {
        ControlMessage { kind: MessageKind::Stop, object: object.into(), target: None, value: None }
    }

    pub fn param(object: impl Into<String>, target: impl Into<String>, value: i64) -> Self {
        ControlMessage { kind: MessageKind::Param, object: object.into(), target: Some(target.into()), value: Some(value) }
    }

    /// Whether `target`/`value` are present exactly for param messages.
    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            MessageKind::Param => self.target.is_some() && self.value.is_some(),
            _ => self.target.is_none() && self.value.is_none(),
        }
    }
}

impl fmt::Display for ControlMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MessageKind::Start => write!(f, "start({})", self.object),
            MessageKind::Stop => write!(f, "stop({})", self.object),
            MessageKind::Param => write!(
                f,
                "param({}, {}={})",
                self.object,
                self.target.as_deref().unwrap_or("?"),
                self.value.unwrap_or_default()
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Param {
    /// Offset from the object's start.
    pub offset: Tu,
    pub target: String,
    pub value: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase", deny_unknown_fields))]
pub struct TemporalObject {
    pub id: String,
    pub duration: Duration,
    /// Sent when the object starts; defaults to `start(id)`.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub start_msg: Option<ControlMessage>,
    /// Sent in the object's last unit; defaults to `stop(id)`.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub end_msg: Option<ControlMessage>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Vec::is_empty"))]
    pub params: Vec<Param>,
}

impl TemporalObject {
    pub fn fixed(id: impl Into<String>, d: Tu) -> Self {
        TemporalObject { id: id.into(), duration: Duration::Fixed(d), start_msg: None, end_msg: None, params: Vec::new() }
    }

    pub fn flexible(id: impl Into<String>, dmin: Tu, dmax: Tu) -> Self {
        TemporalObject {
            id: id.into(),
            duration: Duration::Flexible { dmin, dmax },
            start_msg: None,
            end_msg: None,
            params: Vec::new(),
        }
    }

    pub fn with_param(mut self, offset: Tu, target: impl Into<String>, value: i64) -> Self {
        self.params.push(Param { offset, target: target.into(), value });
        self
    }

    pub fn start_message(&self) -> ControlMessage {
        self.start_msg.clone().unwrap_or_else(|| ControlMessage::start(self.id.clone()))
    }

    pub fn end_message(&self) -> ControlMessage {
        self.end_msg.clone().unwrap_or_else(|| ControlMessage::stop(self.id.clone()))
    }
}

/// Relation between durations: `dur(a) rel dur(b) + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DurRel {
    #[cfg_attr(feature = "serde", serde(rename = "="))]
    Eq,
    #[cfg_attr(feature = "serde", serde(rename = "<="))]
    Le,
    #[cfg_attr(feature = "serde", serde(rename = "<"))]
    Lt,
    #[cfg_attr(feature = "serde", serde(rename = "!="))]
    Ne,
}

impl DurRel {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            DurRel::Eq => a == b,
            DurRel::Le => a <= b,
            DurRel::Lt => a < b,
            DurRel::Ne => a != b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            DurRel::Eq => "=",
            DurRel::Le => "<=",
            DurRel::Lt => "<",
            DurRel::Ne => "!=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase", deny_unknown_fields))]
pub enum Relation {
    /// `to` starts `delay` units after the last unit of `from`, counted so
    /// that a delay of 1 starts `to` in the unit right after `from` ends.
    Precedence { from: String, to: String, delay: (Tu, Tu) },
    SimultaneousStart { a: String, b: String },
    DurationRel { a: String, rel: DurRel, b: String, offset: i64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase", deny_unknown_fields))]
pub enum Binding {
    StartOf(String),
    DurationOf(String),
    DelayOf { from: String, to: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct InteractionPoint {
    pub id: String,
    pub binds: Binding,
    /// `[earliest, latest]` in units after the enabling event: unit 0 for a
    /// start, the start unit for a duration, the predecessor's last unit for
    /// a delay.
    pub window: (Tu, Tu),
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Arm {
    pub condition: Constraint,
    pub successor: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ConditionalBranch {
    pub at: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub arms: Vec<Arm>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub default: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Score {
    #[cfg_attr(feature = "serde", serde(default))]
    pub vars: Vec<VarDecl>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub objects: Vec<TemporalObject>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub relations: Vec<Relation>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub points: Vec<InteractionPoint>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub branches: Vec<ConditionalBranch>,
    /// Constraints over score variables and `dur_<object>` symbols.
    #[cfg_attr(feature = "serde", serde(default))]
    pub globals: Vec<Constraint>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub roots: Vec<String>,
    pub horizon: Tu,
}

/// Generated signal and symbol names.
pub mod names {
    use alloc::format;
    use alloc::string::String;

    pub fn go(group: &str) -> String {
        format!("go_{group}")
    }
    pub fn sched(group: &str) -> String {
        format!("sched_{group}")
    }
    pub fn start(o: &str) -> String {
        format!("start_{o}")
    }
    pub fn running(o: &str) -> String {
        format!("running_{o}")
    }
    pub fn end(o: &str) -> String {
        format!("end_{o}")
    }
    pub fn param(o: &str, index: usize) -> String {
        format!("param_{o}_{index}")
    }
    pub fn param_target(o: &str, target: &str) -> String {
        format!("param_{o}_{target}")
    }
    pub fn dur(o: &str) -> String {
        format!("dur_{o}")
    }
    pub fn ev(p: &str) -> String {
        format!("ev_{p}")
    }
    pub fn hit(p: &str) -> String {
        format!("hit_{p}")
    }
    /// Told when an arm of the branch after `o` is taken.
    pub fn taken(o: &str) -> String {
        format!("taken_{o}")
    }
}

impl Score {
    pub fn empty(horizon: Tu) -> Self {
        Score { horizon, ..Score::default() }
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn object(&self, id: &str) -> Option<&TemporalObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn point(&self, id: &str) -> Option<&InteractionPoint> {
        self.points.iter().find(|p| p.id == id)
    }

    pub fn is_root(&self, id: &str) -> bool {
        self.roots.iter().any(|r| r == id)
    }

    /// Simultaneous-start group of every object, as the index of its first
    /// member in score order. Unknown ids are ignored.
    pub fn groups(&self) -> Vec<usize> {
        let n = self.objects.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for r in &self.relations {
            if let Relation::SimultaneousStart { a, b } = r {
                if let (Some(i), Some(j)) = (self.object_index(a), self.object_index(b)) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                    parent[hi] = lo;
                }
            }
        }
        (0..n).map(|i| find(&mut parent, i)).collect()
    }

    /// Admissible durations of every object once duration relations are
    /// taken into account (pairwise arc consistency to a fixpoint). `Err`
    /// carries the index of a relation that emptied a set.
    pub fn admissible_durations(&self) -> Result<Vec<Vec<i64>>, usize> {
        let mut sets: Vec<Vec<i64>> =
            self.objects.iter().map(|o| (o.duration.min() as i64..=o.duration.max() as i64).collect()).collect();
        loop {
            let mut changed = false;
            for (ri, r) in self.relations.iter().enumerate() {
                let Relation::DurationRel { a, rel, b, offset } = r else { continue };
                let (Some(i), Some(j)) = (self.object_index(a), self.object_index(b)) else { continue };
                let sb = sets[j].clone();
                let before = sets[i].len();
                sets[i].retain(|&x| sb.iter().any(|&y| rel.holds(x, y + offset)));
                let sa = sets[i].clone();
                let before_b = sets[j].len();
                sets[j].retain(|&y| sa.iter().any(|&x| rel.holds(x, y + offset)));
                if sets[i].is_empty() || sets[j].is_empty() {
                    return Err(ri);
                }
                changed |= sets[i].len() != before || sets[j].len() != before_b;
            }
            if !changed {
                return Ok(sets);
            }
        }
    }

    /// Variables the environment may assert: one event signal per
    /// interaction point (point order), then the score variables that occur
    /// in branch conditions (order of first occurrence).
    pub fn event_alphabet(&self) -> Vec<String> {
        let mut out: Vec<String> = self.points.iter().map(|p| names::ev(&p.id)).collect();
        let mut seen: BTreeSet<String> = out.iter().cloned().collect();
        for b in &self.branches {
            for arm in &b.arms {
                for v in arm.condition.vars() {
                    if seen.insert(v.into()) {
                        out.push(v.into());
                    }
                }
            }
        }
        out
    }

    /// One-line summary, used in diagnostics and logs.
    pub fn summary(&self) -> String {
        format!(
            "{} objects, {} relations, {} points, {} branches, horizon {}",
            self.objects.len(),
            self.relations.len(),
            self.points.len(),
            self.branches.len(),
            self.horizon
        )
    }
}
