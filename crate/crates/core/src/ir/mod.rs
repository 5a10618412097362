//! Constraint intermediate representation: variables, penalty polynomials,
//! and the assembled QUBO / Ising instances.
//!
//! Every constraint carries a polynomial in *indicator form*: it evaluates to
//! zero exactly on the assignments that satisfy the constraint and to at
//! least one everywhere else. Assembly is then a weighted sum, with no
//! further squaring.

mod constraint;
pub mod coo;
mod ising;
mod poly;
mod qubo;
mod system;

pub use constraint::{
    gate_penalty, linear_eq_penalty, signb_penalty, signb_penalty_folded, Constraint, ConstraintKind, GateKind,
};
pub use ising::{qubo_to_ising, IsingInstance};
pub use poly::{QuadPoly, VarId};
pub use qubo::{assemble_qubo, Audit, AuditEntry, AuditReport, QuboInstance, Violation};
pub use system::{ConstraintSystem, SlackOf, VarRole};
pub(crate) use system::bit_length as system_bit_length;
