//! Interactive scores compiled to a timed concurrent-constraint calculus.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every pure part of the
//! engine:
//!
//! * [`constraint`]: finite-domain integer store with exact entailment.
//! * [`ntcc`]: process terms and the discrete-time interpreter.
//! * [`score`]: the score model, validation and the event alphabet.
//! * [`compile`]: translation of a score into processes, plus an independent
//!   direct simulator used to cross-check it.
//! * [`engine`]: the logical (clock-free) part of a performance session.
//! * [`verify`]: a bounded explicit-state checker for bounded LTL properties.
//!
//! Wall-clock scheduling, file formats and the command line live in the
//! `ntscore` crate.

#![no_std]

extern crate alloc;

pub mod compile;
pub mod constraint;
pub mod engine;
pub mod ntcc;
pub mod score;
pub mod verify;

pub use compile::{compile, oracle_simulate, CompiledScore, CompileError, OracleTrace};
pub use constraint::{Constraint, LinExpr, Rel, Store, StoreError, VarDecl};
pub use engine::{Engine, Event, UnitRecord};
pub use ntcc::{ChoiceMode, ChoicePolicy, DefTable, Process, StepResult};
pub use score::{ControlMessage, Diagnostic, Score};
pub use verify::{check, reachable, replay, EnvSpec, Formula, Property, Verdict};
