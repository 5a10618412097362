use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use super::constraint::Constraint;
use super::poly::QuadPoly;
use super::system::VarRole;
use crate::{Coeff, Error, Result};

/// `H(x) = H_0(x) + sum_k weight_k * P_k(x)` in expanded form, together with
/// the pieces it was built from so assignments can be audited.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuboInstance {
    num_vars: usize,
    coefficients: QuadPoly,
    registry: Vec<VarRole>,
    objective: QuadPoly,
    constraints: Vec<Constraint>,
    weights: Vec<Coeff>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub index: usize,
    pub label: String,
    pub penalty: f64,
}

/// Constraint satisfaction summary for one assignment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Audit {
    pub total: usize,
    pub satisfied: usize,
    pub violated: Vec<Violation>,
}

impl Audit {
    pub fn all_satisfied(&self) -> bool {
        self.satisfied == self.total
    }

    pub fn satisfied_fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.satisfied as f64 / self.total as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditEntry {
    pub label: String,
    pub penalty: f64,
}

/// Per-constraint penalty listing, written as the audit JSON file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub total: usize,
    pub satisfied: usize,
    pub energy: f64,
    pub objective: f64,
    pub constraints: Vec<AuditEntry>,
}

pub fn assemble_qubo(
    objective: QuadPoly,
    constraints: Vec<Constraint>,
    weights: Vec<Coeff>,
    registry: Vec<VarRole>,
) -> Result<QuboInstance> {
    if weights.len() != constraints.len() {
        return Err(Error::Dimension {
            expected: constraints.len(),
            got: weights.len(),
        });
    }
    let n = registry.len();
    let check = |p: &QuadPoly| match p.max_var() {
        Some(v) if v.0 >= n => Err(Error::UnregisteredVar(v.0)),
        _ => Ok(()),
    };
    check(&objective)?;
    let mut coefficients = objective.clone();
    for (c, &w) in constraints.iter().zip(&weights) {
        check(&c.poly)?;
        coefficients.add_scaled(&c.poly, w);
    }
    Ok(QuboInstance {
        num_vars: n,
        coefficients,
        registry,
        objective,
        constraints,
        weights,
    })
}

impl QuboInstance {
    /// A bare instance with no constraint bookkeeping, e.g. read from a file.
    pub fn from_poly(num_vars: usize, coefficients: QuadPoly) -> Result<Self> {
        assemble_qubo(coefficients, Vec::new(), Vec::new(), vec![VarRole::Free; num_vars])
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn coefficients(&self) -> &QuadPoly {
        &self.coefficients
    }

    pub fn objective(&self) -> &QuadPoly {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn weights(&self) -> &[Coeff] {
        &self.weights
    }

    pub fn registry(&self) -> &[VarRole] {
        &self.registry
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    fn check_len(&self, x: &[u8]) -> Result<()> {
        if x.len() != self.num_vars {
            return Err(Error::Dimension {
                expected: self.num_vars,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[u8]) -> Result<Coeff> {
        self.check_len(x)?;
        Ok(self.coefficients.evaluate(x))
    }

    pub fn evaluate_f64(&self, x: &[u8]) -> Result<f64> {
        Ok(self.evaluate(x)?.to_f64().unwrap_or(f64::NAN))
    }

    pub fn objective_value(&self, x: &[u8]) -> Result<Coeff> {
        self.check_len(x)?;
        Ok(self.objective.evaluate(x))
    }

    /// `H_0(x) + sum_k weight_k P_k(x)`, evaluated term by term.
    pub fn evaluate_by_parts(&self, x: &[u8]) -> Result<Coeff> {
        self.check_len(x)?;
        Ok(self
            .constraints
            .iter()
            .zip(&self.weights)
            .fold(self.objective.evaluate(x), |acc, (c, &w)| acc + w * c.penalty(x)))
    }

    pub fn audit(&self, x: &[u8]) -> Result<Audit> {
        self.check_len(x)?;
        let violated: Vec<Violation> = self
            .constraints
            .iter()
            .enumerate()
            .filter_map(|(index, c)| {
                let p = c.penalty(x);
                (!p.is_zero()).then(|| Violation {
                    index,
                    label: c.label.clone(),
                    penalty: p.to_f64().unwrap_or(f64::NAN),
                })
            })
            .collect();
        Ok(Audit {
            total: self.constraints.len(),
            satisfied: self.constraints.len() - violated.len(),
            violated,
        })
    }

    pub fn is_feasible(&self, x: &[u8]) -> Result<bool> {
        self.check_len(x)?;
        Ok(self.constraints.iter().all(|c| c.is_satisfied(x)))
    }

    pub fn audit_report(&self, x: &[u8]) -> Result<AuditReport> {
        self.check_len(x)?;
        let constraints: Vec<AuditEntry> = self
            .constraints
            .iter()
            .map(|c| AuditEntry {
                label: c.label.clone(),
                penalty: c.penalty(x).to_f64().unwrap_or(f64::NAN),
            })
            .collect();
        Ok(AuditReport {
            total: constraints.len(),
            satisfied: constraints.iter().filter(|e| e.penalty == 0.0).count(),
            energy: self.evaluate_f64(x)?,
            objective: self.objective.evaluate_f64(x),
            constraints,
        })
    }

    /// Smallest penalty weight over all constraints, if any.
    pub fn min_weight(&self) -> Option<Coeff> {
        self.weights.iter().copied().min()
    }
}
