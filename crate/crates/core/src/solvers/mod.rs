//! Energy minimizers over [`QuboInstance`](crate::ir::QuboInstance)s.
//!
//! All solvers share the integer view in [`ScaledQubo`]: coefficients are
//! multiplied by the least common denominator so energy differences are exact
//! integers. Reported energies are always recomputed from the exact rational
//! instance.

mod anneal;
mod brute;
mod elimination;
mod fem;
mod result;
mod scaled;

pub use anneal::{simulated_annealing, Annealer, BetaSchedule, SaParams};
pub use brute::{brute_force, BRUTE_FORCE_CAP};
pub use elimination::{elimination_order, exact_minimize, ELIMINATION_WIDTH_CAP};
pub use fem::{fem_solve, hyperparameter_search, BinaryIsing, FemGradient, FemGrid, FemParams, TemperatureOrder};
pub use result::{RestartResult, SolverResult};
pub use scaled::ScaledQubo;
