//! Finite-domain integer constraints and the store agents tell to and ask of.

mod expr;
mod parse;
mod solver;
mod store;

pub use expr::{Atom, Constraint, LinExpr, Rel, VarDecl, VarMap};
pub use parse::{parse_constraint, parse_lin_expr, ParseError};
pub use store::{Assignment, Store, StoreError, VarTable, Watch, DEFAULT_ENUMERATION_CAP};
