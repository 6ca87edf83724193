//! Process terms of the timed concurrent-constraint calculus and their
//! discrete-time interpreter.
//!
//! A time unit runs a process to quiescence against a fresh store seeded
//! with the environment input, then hands the residual to the next unit
//! through [`future`].

mod choice;
mod process;
mod reduce;

use alloc::string::String;
use alloc::vec::Vec;

use crate::constraint::StoreError;

pub use choice::{ChoiceKind, ChoiceMode, ChoicePoint, ChoicePolicy, Chooser, FirstChoice, RandomChoice, ScriptedChoice};
pub use process::{Branch, DefTable, Definition, Process};
pub use reduce::{future, Fired, Machine, Progress, Quiescent, Reduction, StepResult, DEFAULT_BUDGET};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProcessError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("call of undefined process `{0}`")]
    UnknownDefinition(String),
    #[error("`{name}` expects {expected} arguments, got {found}")]
    Arity { name: String, expected: usize, found: usize },
    #[error("argument of `{0}` is not ground")]
    NonGroundArgument(String),
    #[error("unguarded recursion: {}", .0.join(" -> "))]
    UnguardedRecursion(Vec<String>),
    #[error("divergent time unit: more than {0} reduction steps")]
    Divergent(u64),
    #[error("term is not quiescent: {0}")]
    NotQuiescent(String),
    #[error("enumerate-all is only available to the explorer")]
    EnumerateUnsupported,
}
