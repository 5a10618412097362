//! Robustness verification of binary neural networks through QUBO encodings.
//!
//! The pipeline compiles "is there a small bit-flip perturbation of this input
//! that changes the predicted class?" into a quadratic unconstrained binary
//! optimization problem, minimizes it with exact or annealing-style solvers,
//! and confirms any witness by re-running the network on the perturbed input.
//!
//! * [`bnn`]: sign-activation networks, binarized datasets, IDX ingestion.
//! * [`ir`]: variable registry, penalty polynomials, QUBO and Ising forms.
//! * [`encoder`]: network + sample + perturbation budget to QUBO.
//! * [`solvers`]: exhaustive and exact oracles, simulated annealing, free energy machine.
//! * [`verifier`]: pixel selection, decoding, reverse check and verdicts.

pub mod bnn;
pub mod encoder;
mod error;
pub mod ir;
pub mod render;
pub mod solvers;
pub mod verifier;

pub use error::{Error, Result};

/// Exact coefficient type used by every polynomial in the IR.
pub type Coeff = num_rational::Rational64;
