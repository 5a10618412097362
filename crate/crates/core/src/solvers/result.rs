use serde::{Serialize, Serializer};

use crate::ir::QuboInstance;
use crate::Result;

fn bit_string<S: Serializer>(bits: &[u8], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect::<String>())
}

/// Best state reached by one independent run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartResult {
    pub energy: f64,
    #[serde(serialize_with = "bit_string")]
    pub assignment: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverResult {
    pub solver: &'static str,
    #[serde(serialize_with = "bit_string")]
    pub best_assignment: Vec<u8>,
    pub best_energy: f64,
    /// True when `best_energy` is a proven global minimum.
    pub proven_optimal: bool,
    pub restarts: Vec<RestartResult>,
    pub samples_evaluated: u64,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

impl SolverResult {
    pub(crate) fn single(
        solver: &'static str,
        q: &QuboInstance,
        assignment: Vec<u8>,
        samples_evaluated: u64,
        proven_optimal: bool,
    ) -> Result<Self> {
        let energy = q.evaluate_f64(&assignment)?;
        Ok(SolverResult {
            solver,
            best_assignment: assignment.clone(),
            best_energy: energy,
            proven_optimal,
            restarts: vec![RestartResult { energy, assignment }],
            samples_evaluated,
            seed: None,
            wall_time: Default::default(),
        })
    }

    /// Picks the lowest exact energy, breaking ties by restart index.
    pub(crate) fn merge(
        solver: &'static str,
        q: &QuboInstance,
        runs: Vec<Vec<u8>>,
        samples_evaluated: u64,
        seed: u64,
    ) -> Result<Self> {
        let mut best: Option<(crate::Coeff, usize)> = None;
        let mut restarts = Vec::with_capacity(runs.len());
        for (i, assignment) in runs.into_iter().enumerate() {
            let e = q.evaluate(&assignment)?;
            if best.is_none_or(|(b, _)| e < b) {
                best = Some((e, i));
            }
            restarts.push(RestartResult {
                energy: q.evaluate_f64(&assignment)?,
                assignment,
            });
        }
        let (_, index) = best.ok_or_else(|| crate::Error::InvalidParams("no restarts".into()))?;
        Ok(SolverResult {
            solver,
            best_assignment: restarts[index].assignment.clone(),
            best_energy: restarts[index].energy,
            proven_optimal: false,
            restarts,
            samples_evaluated,
            seed: Some(seed),
            wall_time: Default::default(),
        })
    }
}
