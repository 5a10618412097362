use serde::{Deserialize, Serialize};

use super::constraint::{linear_eq_penalty, Constraint};
use super::poly::{QuadPoly, VarId};
use super::qubo::{assemble_qubo, QuboInstance};
use crate::{Coeff, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlackOf {
    Budget,
    Misclassification,
}

/// What a variable stands for. Layers are numbered like the activations they
/// feed: products of layer `l` combine `W^l` with the input to layer `l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum VarRole {
    Perturbation { pixel: usize },
    Product { layer: usize, neuron: usize, input: usize },
    Neuron { layer: usize, neuron: usize },
    SignAux { layer: usize, neuron: usize, bit: usize },
    TwosComplementBit { class: usize, bit: usize },
    ArgmaxFlag { class: usize },
    Slack { of: SlackOf, bit: usize },
    /// Imported from a file with no role information.
    Free,
}

/// Single-writer builder for variables and constraints.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSystem {
    roles: Vec<VarRole>,
    constraints: Vec<Constraint>,
    weights: Vec<Option<Coeff>>,
}

/// Bits needed to binary-encode every integer in `0..=bound`.
pub(crate) fn bit_length(bound: u64) -> usize {
    (u64::BITS - bound.leading_zeros()) as usize
}

impl ConstraintSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self, role: VarRole) -> VarId {
        self.roles.push(role);
        VarId(self.roles.len() - 1)
    }

    pub fn fresh_many(&mut self, count: usize, role: impl Fn(usize) -> VarRole) -> Vec<VarId> {
        (0..count).map(|i| self.fresh(role(i))).collect()
    }

    pub fn num_vars(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[VarRole] {
        &self.roles
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    fn check_registered(&self, c: &Constraint) -> Result<()> {
        match c.vars.iter().find(|v| v.0 >= self.roles.len()) {
            Some(v) => Err(Error::UnregisteredVar(v.0)),
            None => Ok(()),
        }
    }

    /// Adds a constraint with the default weight; returns its index.
    pub fn add(&mut self, c: Constraint) -> Result<usize> {
        self.check_registered(&c)?;
        self.constraints.push(c);
        self.weights.push(None);
        Ok(self.constraints.len() - 1)
    }

    /// Adds a constraint with an explicit penalty weight.
    pub fn add_weighted(&mut self, c: Constraint, weight: Coeff) -> Result<usize> {
        let idx = self.add(c)?;
        self.weights[idx] = Some(weight);
        Ok(idx)
    }

    /// Rewrites `sum terms <= bound` as `sum terms + sum 2^j b_j - bound = 0`
    /// with `bit_length(bound)` fresh slack bits.
    ///
    /// The slack range may exceed `bound`; the equality still enforces the
    /// inequality because the left-hand terms are nonnegative.
    pub fn slack_encode_leq(
        &mut self,
        terms: &[VarId],
        bound: i64,
        of: SlackOf,
        label: impl Into<String>,
    ) -> Result<(usize, Vec<VarId>)> {
        if bound < 0 {
            return Err(Error::InvalidConstraint(format!("negative bound {bound}")));
        }
        let bits = bit_length(bound as u64);
        let slack = self.fresh_many(bits, |bit| VarRole::Slack { of, bit });
        let mut lin: Vec<(VarId, i64)> = terms.iter().map(|&v| (v, 1)).collect();
        lin.extend(slack.iter().enumerate().map(|(j, &b)| (b, 1i64 << j)));
        let c = linear_eq_penalty(&lin, -bound, label)?;
        Ok((self.add(c)?, slack))
    }

    /// Assembles the final QUBO; constraints without an explicit weight get
    /// `default_weight`.
    pub fn into_qubo(self, objective: QuadPoly, default_weight: Coeff) -> Result<QuboInstance> {
        let weights: Vec<Coeff> = self.weights.iter().map(|w| w.unwrap_or(default_weight)).collect();
        assemble_qubo(objective, self.constraints, weights, self.roles)
    }
}
