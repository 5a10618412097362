//! End-to-end verification: choose perturbable pixels, encode, solve, decode
//! and confirm any witness on the original network.
//!
//! A witness is reported only when the decoded assignment satisfies every
//! constraint *and* the perturbed input really changes the label within
//! budget. Heuristic solvers that find no witness leave the query
//! unresolved; only an exact solver whose proven minimum exceeds the budget
//! establishes robustness, and then only for this model and pixel set.

use std::time::Instant;

use serde::Serialize;

use crate::bnn::{BinarizedSample, BnnModel, SpinBit};
use crate::encoder::{build_verification_qubo, EncodeOptions, EncodedInstance, PerturbationSpec};
use crate::solvers::{
    brute_force, exact_minimize, fem_solve, hyperparameter_search, simulated_annealing, FemGrid, FemParams,
    SaParams, SolverResult,
};
use crate::{Coeff, Error, Result};

/// The `p_max` non-padding pixels with the lowest mean Boolean activation
/// over `samples`, ties going to the lower index. Returned in ascending
/// index order.
pub fn select_perturbable_pixels(model: &BnnModel, samples: &[BinarizedSample], p_max: usize) -> Result<Vec<usize>> {
    let active = model.active_input_width();
    if p_max > active {
        return Err(Error::InvalidSpec(format!(
            "cannot select {p_max} pixels from {active} non-padding positions"
        )));
    }
    if let Some(s) = samples.iter().find(|s| s.input.len() != model.input_width()) {
        return Err(Error::Dimension {
            expected: model.input_width(),
            got: s.input.len(),
        });
    }
    // integer counts give the same order as averages without rounding
    let mut counts: Vec<(usize, usize)> = (0..active)
        .map(|j| (samples.iter().filter(|s| s.input[j] == SpinBit::PLUS).count(), j))
        .collect();
    counts.sort_unstable();
    let mut chosen: Vec<usize> = counts[..p_max].iter().map(|&(_, j)| j).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Perturbation mask over the full input width.
pub fn decode_solution(inst: &EncodedInstance, assignment: &[u8]) -> Result<Vec<u8>> {
    inst.decode(assignment)
}

/// Applies a flip mask to a spin input.
pub fn apply_mask(input: &[SpinBit], mask: &[u8]) -> Vec<SpinBit> {
    input
        .iter()
        .zip(mask)
        .map(|(&x, &t)| if t == 1 { x.flip() } else { x })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReverseCheck {
    pub perturbation_size: usize,
    pub within_budget: bool,
    pub label_changed: bool,
    pub clean_label: usize,
    pub new_label: usize,
}

impl ReverseCheck {
    pub fn passed(&self) -> bool {
        self.within_budget && self.label_changed
    }
}

/// Re-runs the network on `input` with the masked positions flipped.
pub fn reverse_check(model: &BnnModel, input: &[SpinBit], mask: &[u8], budget: usize) -> Result<ReverseCheck> {
    if mask.len() != input.len() {
        return Err(Error::Dimension {
            expected: input.len(),
            got: mask.len(),
        });
    }
    let clean_label = model.predict(input)?;
    let new_label = model.predict(&apply_mask(input, mask))?;
    let perturbation_size = mask.iter().filter(|&&b| b == 1).count();
    Ok(ReverseCheck {
        perturbation_size,
        within_budget: perturbation_size <= budget,
        label_changed: new_label != clean_label,
        clean_label,
        new_label,
    })
}

/// Ground truth by enumeration: the smallest flip set within the budget
/// that changes the label, if any.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleResult {
    pub clean_label: usize,
    pub budget: usize,
    pub perturbable: Vec<usize>,
    pub masks_checked: u64,
    /// Flipped pixel indices of the first minimal witness, in the order
    /// of increasing flip count and then increasing binary mask value.
    pub witness: Option<Vec<usize>>,
    pub new_label: Option<usize>,
}

impl OracleResult {
    pub fn min_flips(&self) -> Option<usize> {
        self.witness.as_ref().map(Vec::len)
    }
}

/// Tries every subset of the perturbable pixels with at most `budget`
/// flips. Refuses more than `cap` perturbable pixels.
pub fn enumerate_perturbations(
    model: &BnnModel,
    input: &[SpinBit],
    spec: &PerturbationSpec,
    cap: usize,
) -> Result<OracleResult> {
    spec.validate_for(model)?;
    let pixels: Vec<usize> = spec.perturbable().iter().copied().collect();
    if pixels.len() > cap.min(63) {
        return Err(Error::TooLarge {
            what: "perturbable pixels",
            size: pixels.len(),
            cap: cap.min(63),
        });
    }
    let clean_label = model.predict(input)?;
    let mut masks_checked = 0;
    let mut best: Option<(u32, u64, usize)> = None;
    let mut x = input.to_vec();
    for m in 1u64..1 << pixels.len() {
        let flips = m.count_ones();
        if flips as usize > spec.budget() || best.is_some_and(|(k, _, _)| flips >= k) {
            continue;
        }
        masks_checked += 1;
        for (bit, &p) in pixels.iter().enumerate() {
            x[p] = if m >> bit & 1 == 1 { input[p].flip() } else { input[p] };
        }
        let label = model.predict(&x)?;
        if label != clean_label {
            best = Some((flips, m, label));
        }
    }
    Ok(OracleResult {
        clean_label,
        budget: spec.budget(),
        perturbable: pixels.clone(),
        masks_checked,
        witness: best.map(|(_, m, _)| {
            pixels
                .iter()
                .enumerate()
                .filter(|&(bit, _)| m >> bit & 1 == 1)
                .map(|(_, &p)| p)
                .collect()
        }),
        new_label: best.map(|(_, _, label)| label),
    })
}

/// Which minimizer to run on the encoded instance.
#[derive(Clone, Debug, PartialEq)]
pub enum SolverChoice {
    /// Exhaustive enumeration up to `cap` variables, exact bucket
    /// elimination (up to `width_cap` induced width) beyond that.
    Exact { cap: usize, width_cap: usize },
    Annealing(SaParams),
    Fem(FemParams),
    FemSearch(FemParams, FemGrid),
}

impl SolverChoice {
    pub fn run(&self, inst: &EncodedInstance) -> Result<(SolverResult, serde_json::Value)> {
        let q = &inst.qubo;
        Ok(match self {
            SolverChoice::Exact { cap, width_cap } => {
                let r = if q.num_vars() <= *cap {
                    brute_force(q, *cap)?
                } else {
                    exact_minimize(q, *width_cap)?
                };
                let echo = serde_json::json!({ "cap": cap, "width_cap": width_cap });
                (r, echo)
            }
            SolverChoice::Annealing(p) => (simulated_annealing(q, p)?, serde_json::to_value(p)?),
            SolverChoice::Fem(p) => (fem_solve(q, p)?, serde_json::to_value(p)?),
            SolverChoice::FemSearch(base, grid) => {
                let (p, r) = hyperparameter_search(q, base, grid)?;
                (r, serde_json::json!({ "selected": p, "grid": grid }))
            }
        })
    }
}

/// Runs of consecutive indices as `[start, length]` pairs.
pub fn run_length_encode(indices: &[usize]) -> Vec<[usize; 2]> {
    let mut runs: Vec<[usize; 2]> = Vec::new();
    for &i in indices {
        match runs.last_mut() {
            Some([start, len]) if *start + *len == i => *len += 1,
            _ => runs.push([i, 1]),
        }
    }
    runs
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    /// A confirmed adversarial perturbation; `flipped` lists the changed
    /// input positions as `[start, length]` runs.
    NonRobust { flipped: Vec<[usize; 2]>, new_label: usize },
    /// No witness found. Says nothing about robustness.
    Unresolved,
    /// The exact minimum energy exceeds the budget, so no perturbation of
    /// the selected pixels within budget changes the label.
    RobustWithinModel { minimum_energy: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSummary {
    pub name: &'static str,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub best_energy: f64,
    pub proven_optimal: bool,
    pub restarts: usize,
    pub feasible_restarts: usize,
    pub samples_evaluated: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditSummary {
    pub total: usize,
    pub satisfied: usize,
    pub violated: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub sample_id: Option<usize>,
    pub clean_label: usize,
    pub budget: usize,
    pub perturbable: Vec<usize>,
    pub model_fingerprint: String,
    pub num_vars: usize,
    pub num_constraints: usize,
    pub penalty_weight: String,
    pub solver: SolverSummary,
    /// Audit of the reported assignment: the witness when there is one,
    /// otherwise the lowest-energy sample.
    pub audit: AuditSummary,
    pub reverse_check: Option<ReverseCheck>,
    pub diagnostics: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

impl VerificationReport {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Flip mask of a non-robust verdict.
    pub fn witness_mask(&self, width: usize) -> Option<Vec<u8>> {
        match &self.verdict {
            Verdict::NonRobust { flipped, .. } => {
                let mut mask = vec![0u8; width];
                for &[start, len] in flipped {
                    mask[start..start + len].fill(1);
                }
                Some(mask)
            }
            _ => None,
        }
    }
}

pub struct VerifyOptions {
    pub encode: EncodeOptions,
    pub solver: SolverChoice,
    pub sample_id: Option<usize>,
    /// Record wall time in the report (breaks byte-identical reruns).
    pub timings: bool,
}

pub fn verify(
    model: &BnnModel,
    sample: &BinarizedSample,
    spec: &PerturbationSpec,
    options: &VerifyOptions,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let mut inst = build_verification_qubo(model, sample, spec, options.encode)?;
    inst.meta.sample_id = options.sample_id;
    let (result, params) = options.solver.run(&inst)?;
    let q = &inst.qubo;

    let mut ranked: Vec<(Coeff, usize)> = result
        .restarts
        .iter()
        .enumerate()
        .map(|(i, r)| q.evaluate(&r.assignment).map(|e| (e, i)))
        .collect::<Result<_>>()?;
    ranked.sort();
    let mut feasible = Vec::new();
    for &(_, i) in &ranked {
        if q.is_feasible(&result.restarts[i].assignment)? {
            feasible.push(i);
        }
    }

    let mut diagnostics = Vec::new();
    let chosen = feasible.first().copied().unwrap_or(ranked[0].1);
    let assignment = &result.restarts[chosen].assignment;
    let audit = q.audit(assignment)?;
    let mask = decode_solution(&inst, assignment)?;
    let check = reverse_check(model, &sample.input, &mask, spec.budget())?;

    let verdict = if audit.all_satisfied() {
        if check.passed() {
            Verdict::NonRobust {
                flipped: run_length_encode(&flipped(&mask)),
                new_label: check.new_label,
            }
        } else {
            diagnostics.push(format!(
                "feasible assignment fails the reverse check (size {}, label {} -> {})",
                check.perturbation_size, check.clean_label, check.new_label
            ));
            Verdict::Unresolved
        }
    } else {
        if check.passed() {
            diagnostics.push(format!(
                "infeasible assignment decodes to an adversarial mask ({} violated constraints)",
                audit.violated.len()
            ));
        }
        let minimum = q.evaluate(&result.best_assignment)?;
        if result.proven_optimal && minimum > Coeff::from_integer(spec.budget() as i64) {
            Verdict::RobustWithinModel {
                minimum_energy: crate::ir::coo::format_coeff(minimum),
            }
        } else {
            Verdict::Unresolved
        }
    };
    if let Verdict::NonRobust { .. } = verdict {
        debug_assert!(check.passed());
    }
    Ok(VerificationReport {
        verdict,
        sample_id: options.sample_id,
        clean_label: sample.label,
        budget: spec.budget(),
        perturbable: spec.perturbable().iter().copied().collect(),
        model_fingerprint: inst.meta.model_fingerprint.clone(),
        num_vars: q.num_vars(),
        num_constraints: q.num_constraints(),
        penalty_weight: inst.meta.penalty_weight.clone(),
        solver: SolverSummary {
            name: result.solver,
            params,
            seed: result.seed,
            best_energy: result.best_energy,
            proven_optimal: result.proven_optimal,
            restarts: result.restarts.len(),
            feasible_restarts: feasible.len(),
            samples_evaluated: result.samples_evaluated,
        },
        audit: AuditSummary {
            total: audit.total,
            satisfied: audit.satisfied,
            violated: audit.violated.iter().map(|v| v.label.clone()).collect(),
        },
        reverse_check: Some(check),
        diagnostics,
        wall_time_secs: options.timings.then(|| start.elapsed().as_secs_f64()),
    })
}

fn flipped(mask: &[u8]) -> Vec<usize> {
    (0..mask.len()).filter(|&i| mask[i] == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::WeightMatrix;
    use crate::solvers::{BRUTE_FORCE_CAP, ELIMINATION_WIDTH_CAP};

    fn spins(bits: &[u8]) -> Vec<SpinBit> {
        bits.iter().map(|&b| if b == 1 { SpinBit::PLUS } else { SpinBit::MINUS }).collect()
    }

    fn sample(bits: &[u8], label: usize) -> BinarizedSample {
        BinarizedSample {
            input: spins(bits),
            label,
        }
    }

    fn model(layers: &[Vec<Vec<i8>>]) -> BnnModel {
        BnnModel::new(layers.iter().map(|l| WeightMatrix::from_rows(l).unwrap()).collect()).unwrap()
    }

    fn exact() -> VerifyOptions {
        VerifyOptions {
            encode: EncodeOptions::default(),
            solver: SolverChoice::Exact {
                cap: BRUTE_FORCE_CAP,
                width_cap: ELIMINATION_WIDTH_CAP,
            },
            sample_id: None,
            timings: false,
        }
    }

    #[test]
    fn pixel_selection_examples() {
        let m = model(&[vec![vec![1; 7]], vec![vec![1], vec![-1]]]);
        let mut ds: Vec<BinarizedSample> = (0..4).map(|_| sample(&[1, 1, 1, 0, 1, 1, 1], 0)).collect();
        assert_eq!(select_perturbable_pixels(&m, &ds, 1).unwrap(), vec![3]);
        ds = (0..4).map(|_| sample(&[1; 7], 0)).collect();
        assert_eq!(select_perturbable_pixels(&m, &ds, 2).unwrap(), vec![0, 1]);
        assert!(select_perturbable_pixels(&m, &ds, 8).is_err());
        let padded = m
            .with_geometry(crate::bnn::InputGeometry {
                rows: 2,
                cols: 2,
                pad_length: 7,
            })
            .unwrap();
        // padding is always -1 and would otherwise be chosen first
        ds = (0..4).map(|_| sample(&[1, 1, 0, 1, 0, 0, 0], 0)).collect();
        assert_eq!(select_perturbable_pixels(&padded, &ds, 1).unwrap(), vec![2]);
        assert!(select_perturbable_pixels(&padded, &ds, 5).is_err());
    }

    #[test]
    fn reverse_check_examples() {
        // one neuron summing all three inputs, read by two opposite classes
        let m = model(&[vec![vec![1, 1, 1]], vec![vec![1], vec![-1]]]);
        let x = spins(&[1, 1, 0]);
        let r = reverse_check(&m, &x, &[0, 0, 0], 1).unwrap();
        assert!(!r.label_changed && r.within_budget);
        let r = reverse_check(&m, &x, &[1, 1, 0], 1).unwrap();
        assert!(r.label_changed && !r.within_budget);
        assert_eq!((r.perturbation_size, r.clean_label, r.new_label), (2, 0, 1));
        assert!(reverse_check(&m, &x, &[1], 1).is_err());
    }

    #[test]
    fn run_length_examples() {
        assert_eq!(run_length_encode(&[]), Vec::<[usize; 2]>::new());
        assert_eq!(run_length_encode(&[2, 3, 4, 7, 9, 10]), vec![[2, 3], [7, 1], [9, 2]]);
    }

    #[test]
    fn toy_non_robust_and_robust() {
        let m = model(&[vec![vec![1, 1, 1]], vec![vec![1], vec![-1]]]);
        let s = sample(&[1, 1, 0], 0);
        let spec = PerturbationSpec::new([0, 1, 2], 2).unwrap();
        let report = verify(&m, &s, &spec, &exact()).unwrap();
        // flipping pixel 0 or pixel 1 both work; enumeration prefers tau_0 = 0
        assert_eq!(
            report.verdict,
            Verdict::NonRobust {
                flipped: vec![[1, 1]],
                new_label: 1
            }
        );
        assert_eq!(report.audit.satisfied, report.audit.total);
        assert_eq!(report.witness_mask(3), Some(vec![0, 1, 0]));

        // only pixel 2 may flip, which pushes the sum further positive
        let spec = PerturbationSpec::new([2], 1).unwrap();
        let report = verify(&m, &s, &spec, &exact()).unwrap();
        assert!(matches!(report.verdict, Verdict::RobustWithinModel { .. }));
        assert!(report.audit.satisfied < report.audit.total);
    }

    #[test]
    fn decode_all_zero_is_empty_mask() {
        let m = model(&[vec![vec![1, 1, 1]], vec![vec![1], vec![-1]]]);
        let spec = PerturbationSpec::new([0, 2], 1).unwrap();
        let inst =
            build_verification_qubo(&m, &sample(&[1, 1, 0], 0), &spec, EncodeOptions::default()).unwrap();
        let zero = vec![0u8; inst.qubo.num_vars()];
        assert_eq!(decode_solution(&inst, &zero).unwrap(), vec![0, 0, 0]);
        assert!(decode_solution(&inst, &zero[1..]).is_err());
        let mut one = zero.clone();
        one[inst.tau_vars[&2].0] = 1;
        assert_eq!(decode_solution(&inst, &one).unwrap(), vec![0, 0, 1]);
    }

    #[test]
    fn heuristic_without_witness_is_unresolved() {
        let m = model(&[vec![vec![1, 1, 1]], vec![vec![1], vec![-1]]]);
        let s = sample(&[1, 1, 0], 0);
        let spec = PerturbationSpec::new([2], 1).unwrap();
        let opts = VerifyOptions {
            solver: SolverChoice::Annealing(SaParams {
                sweeps: 20,
                restarts: 2,
                ..Default::default()
            }),
            ..exact()
        };
        let report = verify(&m, &s, &spec, &opts).unwrap();
        assert_eq!(report.verdict, Verdict::Unresolved);
        assert!(report.wall_time_secs.is_none());
    }

    #[test]
    fn enumeration_finds_minimal_flip_set() {
        // output 0 wins iff x0 + x1 + x2 > 0 (sign of a 3-way vote)
        let m = model(&[vec![vec![1, 1, 1], vec![-1, -1, -1], vec![1, -1, 1]], vec![vec![1, 1, 1], vec![-1, -1, -1]]]);
        let input = spins(&[1, 1, 1]);
        let spec = PerturbationSpec::new(0..3, 3).unwrap();
        let r = enumerate_perturbations(&m, &input, &spec, BRUTE_FORCE_CAP).unwrap();
        let truth = (1u64..8)
            .filter(|&mask| {
                let mask: Vec<u8> = (0..3).map(|i| (mask >> i & 1) as u8).collect();
                m.predict(&apply_mask(&input, &mask)).unwrap() != m.predict(&input).unwrap()
            })
            .map(|mask| mask.count_ones() as usize)
            .min();
        assert_eq!(r.min_flips(), truth);
        let capped = enumerate_perturbations(&m, &input, &spec, 2);
        assert!(matches!(capped, Err(Error::TooLarge { .. })));
    }
}
