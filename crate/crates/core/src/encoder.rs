//! Compiles a network, a correctly classified sample and a perturbation
//! budget into a QUBO whose feasible assignments are exactly the
//! label-changing bit-flip masks within budget.
//!
//! Weights and the clean input are known, so every XNOR of the Boolean
//! network collapses to a BUFFER or a NOT of a single variable:
//!
//! * first layer: `z = XNOR(w, x XOR tau)` is `tau` when `w != x`, `NOT tau`
//!   otherwise; pixels outside the perturbable set are constants and are
//!   folded into the neuron's sign equality;
//! * later layers: `z = XNOR(w, y)` is `y` when `w = 1`, `NOT y` otherwise.
//!
//! Each sign neuron becomes one linear equality that binary-encodes the sum
//! of its `2^N - 1` product bits, the output bit being the most significant
//! one. The output layer compares every class against the true one through a
//! two's-complement difference whose sign bit drives an argmax flag, and at
//! least one flag must be raised.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bnn::{BinarizedSample, BnnModel, SpinBit};
use crate::ir::{
    gate_penalty, linear_eq_penalty, signb_penalty_folded, ConstraintSystem, GateKind, QuadPoly, QuboInstance,
    SlackOf, VarId, VarRole,
};
use crate::{Coeff, Error, Result};

/// Which input positions may flip, and how many of them at most.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    perturbable: BTreeSet<usize>,
    budget: usize,
}

impl PerturbationSpec {
    pub fn new(perturbable: impl IntoIterator<Item = usize>, budget: usize) -> Result<Self> {
        let perturbable: BTreeSet<usize> = perturbable.into_iter().collect();
        if budget > perturbable.len() {
            return Err(Error::InvalidSpec(format!(
                "budget {budget} exceeds the {} perturbable pixels",
                perturbable.len()
            )));
        }
        Ok(PerturbationSpec { perturbable, budget })
    }

    pub fn perturbable(&self) -> &BTreeSet<usize> {
        &self.perturbable
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn validate_for(&self, model: &BnnModel) -> Result<()> {
        let active = model.active_input_width();
        match self.perturbable.iter().next_back() {
            Some(&p) if p >= model.input_width() => Err(Error::InvalidSpec(format!(
                "pixel {p} is out of range for input width {}",
                model.input_width()
            ))),
            Some(&p) if p >= active => Err(Error::InvalidSpec(format!(
                "pixel {p} is padding (image occupies the first {active} positions)"
            ))),
            _ => Ok(()),
        }
    }
}

/// How an output-score tie between the true class and a competitor is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// A tie is adversarial exactly when the classifier's lowest-index
    /// tie-break would pick the competitor, i.e. for competitors with a
    /// smaller class index.
    #[default]
    MatchClassifier,
    /// Every tie raises the flag.
    Adversarial,
    /// No tie raises the flag.
    NotAdversarial,
}

impl TieRule {
    fn tie_counts(self, competitor: usize, truth: usize) -> bool {
        match self {
            TieRule::MatchClassifier => competitor < truth,
            TieRule::Adversarial => true,
            TieRule::NotAdversarial => false,
        }
    }
}

/// Penalty weight applied uniformly to every constraint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PenaltyWeight {
    /// `budget + 1`: any violated constraint costs more than the largest
    /// feasible objective, so the ground state is feasible whenever a
    /// feasible assignment exists.
    #[default]
    Dominant,
    Uniform(Coeff),
}

impl PenaltyWeight {
    fn resolve(self, budget: usize) -> Coeff {
        match self {
            PenaltyWeight::Dominant => Coeff::from_integer(budget as i64 + 1),
            PenaltyWeight::Uniform(w) => w,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EncodeOptions {
    pub penalty_weight: PenaltyWeight,
    pub tie_rule: TieRule,
}

/// How to compute one group of variables from earlier ones, in the order the
/// encoder created them.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Derivation {
    Perturbation { var: VarId, pixel: usize },
    Gate { out: VarId, input: VarId, negate: bool },
    Sign { out: VarId, aux: Vec<VarId>, inputs: Vec<VarId>, constant_ones: usize },
    TwosComplement { bits: Vec<VarId>, plus: Vec<VarId>, minus: Vec<VarId>, constant: i64 },
    Slack { bits: Vec<VarId>, terms: Vec<(VarId, i64)>, constant: i64 },
}

/// Descriptive data recorded alongside an encoded instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub model_fingerprint: String,
    pub sample_id: Option<usize>,
    pub clean_label: usize,
    pub perturbable: Vec<usize>,
    pub budget: usize,
    pub penalty_weight: String,
    pub tie_rule: TieRule,
    pub num_vars: usize,
    pub num_constraints: usize,
}

#[derive(Clone, Debug)]
pub struct EncodedInstance {
    pub qubo: QuboInstance,
    /// Input index to perturbation variable.
    pub tau_vars: BTreeMap<usize, VarId>,
    pub meta: InstanceMeta,
    input_width: usize,
    derivations: Vec<Derivation>,
}

/// Sidecar file: variable index to role, plus the instance metadata.
#[derive(Clone, Debug, Serialize)]
pub struct VariableMap<'a> {
    pub meta: &'a InstanceMeta,
    pub variables: Vec<MappedVar>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MappedVar {
    pub index: usize,
    #[serde(flatten)]
    pub role: VarRole,
}

impl EncodedInstance {
    /// Reads the perturbation mask (over the full input width) out of an assignment.
    pub fn decode(&self, assignment: &[u8]) -> Result<Vec<u8>> {
        if assignment.len() != self.qubo.num_vars() {
            return Err(Error::Dimension {
                expected: self.qubo.num_vars(),
                got: assignment.len(),
            });
        }
        let mut mask = vec![0u8; self.input_width];
        for (&pixel, &v) in &self.tau_vars {
            mask[pixel] = assignment[v.0];
        }
        Ok(mask)
    }

    /// Simulates the encoded circuit for a perturbation mask, filling in every
    /// gate, sign, two's-complement and slack variable with its implied value.
    ///
    /// Returns the assignment and whether every slack value fit its range;
    /// when it did, the assignment has zero total penalty exactly when the
    /// mask is within budget and changes the label.
    pub fn complete_assignment(&self, mask: &[u8]) -> Result<(Vec<u8>, bool)> {
        if mask.len() != self.input_width {
            return Err(Error::Dimension {
                expected: self.input_width,
                got: mask.len(),
            });
        }
        if let Some(p) = (0..mask.len()).find(|&p| mask[p] != 0 && !self.tau_vars.contains_key(&p)) {
            return Err(Error::InvalidSpec(format!("mask flips non-perturbable pixel {p}")));
        }
        let mut x = vec![0u8; self.qubo.num_vars()];
        let mut in_range = true;
        let sum = |x: &[u8], vars: &[VarId]| vars.iter().map(|v| x[v.0] as i64).sum::<i64>();
        for d in &self.derivations {
            match d {
                Derivation::Perturbation { var, pixel } => x[var.0] = mask[*pixel],
                Derivation::Gate { out, input, negate } => x[out.0] = x[input.0] ^ (*negate as u8),
                Derivation::Sign {
                    out,
                    aux,
                    inputs,
                    constant_ones,
                } => {
                    let total = sum(&x, inputs) as usize + constant_ones;
                    x[out.0] = (total >> aux.len()) as u8 & 1;
                    for (i, a) in aux.iter().enumerate() {
                        x[a.0] = ((total >> i) & 1) as u8;
                    }
                }
                Derivation::TwosComplement {
                    bits,
                    plus,
                    minus,
                    constant,
                } => {
                    let v = sum(&x, plus) - sum(&x, minus) + constant;
                    for (b, bit) in bits.iter().zip(twos_complement(v, bits.len())) {
                        x[b.0] = bit;
                    }
                }
                Derivation::Slack { bits, terms, constant } => {
                    let v: i64 = terms.iter().map(|&(t, c)| c * x[t.0] as i64).sum::<i64>() + constant;
                    if v < 0 || v >= 1i64 << bits.len() {
                        in_range = false;
                        continue;
                    }
                    for (i, b) in bits.iter().enumerate() {
                        x[b.0] = ((v >> i) & 1) as u8;
                    }
                }
            }
        }
        Ok((x, in_range))
    }

    pub fn variable_map(&self) -> VariableMap<'_> {
        VariableMap {
            meta: &self.meta,
            variables: self
                .qubo
                .registry()
                .iter()
                .enumerate()
                .map(|(index, &role)| MappedVar { index, role })
                .collect(),
        }
    }
}

/// Little-endian two's-complement digits of `v` in `width` bits.
fn twos_complement(v: i64, width: usize) -> Vec<u8> {
    let u = v.rem_euclid(1i64 << width);
    (0..width).map(|i| ((u >> i) & 1) as u8).collect()
}

/// Stepwise builder; [`build_verification_qubo`] runs all steps in order.
pub struct Encoder<'a> {
    model: &'a BnnModel,
    input: &'a [SpinBit],
    label: usize,
    spec: &'a PerturbationSpec,
    options: EncodeOptions,
    cs: ConstraintSystem,
    derivations: Vec<Derivation>,
    tau: BTreeMap<usize, VarId>,
    /// Neuron outputs of the most recently encoded sign layer.
    neurons: Option<Vec<VarId>>,
    flags: Vec<VarId>,
}

/// An input to a layer: a variable (possibly inverted) or a known bit.
#[derive(Clone, Copy, Debug)]
enum Signal {
    Var { var: VarId, invert: bool },
    Const(bool),
}

impl<'a> Encoder<'a> {
    pub fn new(
        model: &'a BnnModel,
        input: &'a [SpinBit],
        label: usize,
        spec: &'a PerturbationSpec,
        options: EncodeOptions,
    ) -> Result<Self> {
        if input.len() != model.input_width() {
            return Err(Error::Dimension {
                expected: model.input_width(),
                got: input.len(),
            });
        }
        if label >= model.class_count() {
            return Err(Error::InvalidSpec(format!(
                "label {label} out of range for {} classes",
                model.class_count()
            )));
        }
        spec.validate_for(model)?;
        let mut cs = ConstraintSystem::new();
        let mut derivations = Vec::new();
        let mut tau = BTreeMap::new();
        for &pixel in spec.perturbable() {
            let var = cs.fresh(VarRole::Perturbation { pixel });
            derivations.push(Derivation::Perturbation { var, pixel });
            tau.insert(pixel, var);
        }
        Ok(Encoder {
            model,
            input,
            label,
            spec,
            options,
            cs,
            derivations,
            tau,
            neurons: None,
            flags: Vec::new(),
        })
    }

    pub fn system(&self) -> &ConstraintSystem {
        &self.cs
    }

    pub fn tau_vars(&self) -> &BTreeMap<usize, VarId> {
        &self.tau
    }

    fn input_signals(&self) -> Vec<Signal> {
        self.input
            .iter()
            .enumerate()
            .map(|(j, x)| {
                let bit = x.to_bool().is_set();
                match self.tau.get(&j) {
                    Some(&var) => Signal::Var { var, invert: bit },
                    None => Signal::Const(bit),
                }
            })
            .collect()
    }

    fn layer_signals(&self, layer: usize) -> Vec<Signal> {
        if layer == 0 {
            self.input_signals()
        } else {
            self.neurons
                .as_ref()
                .expect("previous layer encoded")
                .iter()
                .map(|&var| Signal::Var { var, invert: false })
                .collect()
        }
    }

    /// Product bits `z_ij = XNOR(w_ij, input_j)` of one row; returns the
    /// product variables and the number of constant products equal to one.
    fn products(&mut self, layer: usize, neuron: usize, inputs: &[Signal]) -> Result<(Vec<VarId>, usize)> {
        let row = self.model.layers()[layer].row(neuron);
        let mut vars = Vec::new();
        let mut ones = 0;
        for (j, (w, sig)) in row.iter().zip(inputs).enumerate() {
            let w = w.to_bool().is_set();
            match *sig {
                Signal::Const(b) => ones += (w == b) as usize,
                Signal::Var { var, invert } => {
                    let z = self.cs.fresh(VarRole::Product { layer, neuron, input: j });
                    let buffer = w != invert;
                    let (kind, name) = if buffer {
                        (GateKind::Buffer, "buffer")
                    } else {
                        (GateKind::Not, "not")
                    };
                    let label = format!("L{layer} n{neuron} in{j} {name}");
                    self.cs.add(gate_penalty(kind, var, z, label)?)?;
                    self.derivations.push(Derivation::Gate {
                        out: z,
                        input: var,
                        negate: !buffer,
                    });
                    vars.push(z);
                }
            }
        }
        Ok((vars, ones))
    }

    fn sign_layer(&mut self, layer: usize) -> Result<Vec<VarId>> {
        let w = &self.model.layers()[layer];
        let fan_in = w.cols();
        let aux_bits = (fan_in + 1).trailing_zeros() as usize - 1;
        let inputs = self.layer_signals(layer);
        let mut outs = Vec::with_capacity(w.rows());
        for neuron in 0..w.rows() {
            let (prods, ones) = self.products(layer, neuron, &inputs)?;
            let aux = self.cs.fresh_many(aux_bits, |bit| VarRole::SignAux {
                layer: layer + 1,
                neuron,
                bit,
            });
            let out = self.cs.fresh(VarRole::Neuron {
                layer: layer + 1,
                neuron,
            });
            let label = format!("L{} n{neuron} sign", layer + 1);
            self.cs
                .add(signb_penalty_folded(&prods, ones, fan_in, out, &aux, label)?)?;
            self.derivations.push(Derivation::Sign {
                out,
                aux,
                inputs: prods,
                constant_ones: ones,
            });
            outs.push(out);
        }
        self.neurons = Some(outs.clone());
        Ok(outs)
    }

    /// First weight layer: perturbation-driven BUFFER/NOT products and the
    /// sign neurons `y^1`. For single-layer models this is a no-op and the
    /// output layer reads the input directly.
    pub fn encode_first_layer(&mut self) -> Result<Vec<VarId>> {
        if self.model.hidden_layer_count() == 0 {
            return Ok(Vec::new());
        }
        self.sign_layer(0)
    }

    /// Hidden weight layer `layer >= 1`, producing `y^{layer + 1}`.
    pub fn encode_hidden_layer(&mut self, layer: usize) -> Result<Vec<VarId>> {
        if layer == 0 || layer >= self.model.hidden_layer_count() {
            return Err(Error::InvalidSpec(format!("layer {layer} is not an inner hidden layer")));
        }
        self.sign_layer(layer)
    }

    /// Output comparison: one two's-complement difference and one argmax
    /// flag per competing class, then `sum(flags) >= 1`.
    pub fn encode_output_layer(&mut self) -> Result<Vec<VarId>> {
        let layer = self.model.layers().len() - 1;
        let classes = self.model.class_count();
        let fan_in = self.model.layers()[layer].cols();
        let inputs = self.layer_signals(layer);
        let rows = (0..classes)
            .map(|c| self.products(layer, c, &inputs))
            .collect::<Result<Vec<_>>>()?;
        // smallest width whose range covers [-fan_in - 1, fan_in]
        let width = crate::ir::system_bit_length(fan_in as u64) + 1;
        let truth = self.label;
        let (truth_prods, truth_ones) = rows[truth].clone();
        let mut flags = Vec::with_capacity(classes - 1);
        for (class, (prods, ones)) in rows.into_iter().enumerate() {
            if class == truth {
                continue;
            }
            let shift = !self.options.tie_rule.tie_counts(class, truth) as i64;
            let constant = ones as i64 - truth_ones as i64 - shift;
            let bits = self
                .cs
                .fresh_many(width, |bit| VarRole::TwosComplementBit { class, bit });
            let mut terms: Vec<(VarId, i64)> = prods.iter().map(|&v| (v, 1)).collect();
            terms.extend(truth_prods.iter().map(|&v| (v, -1)));
            terms.extend(bits[..width - 1].iter().enumerate().map(|(k, &b)| (b, -(1i64 << k))));
            terms.push((bits[width - 1], 1i64 << (width - 1)));
            self.cs.add(linear_eq_penalty(
                &terms,
                constant,
                format!("out c{class} vs c{truth} difference"),
            )?)?;
            self.derivations.push(Derivation::TwosComplement {
                bits: bits.clone(),
                plus: prods,
                minus: truth_prods.clone(),
                constant,
            });
            let flag = self.cs.fresh(VarRole::ArgmaxFlag { class });
            let sign_bit = bits[width - 1];
            self.cs.add(gate_penalty(
                GateKind::Not,
                sign_bit,
                flag,
                format!("out c{class} flag"),
            )?)?;
            self.derivations.push(Derivation::Gate {
                out: flag,
                input: sign_bit,
                negate: true,
            });
            flags.push(flag);
        }
        let slack_bits = crate::ir::system_bit_length(classes as u64 - 2);
        let slack = self.cs.fresh_many(slack_bits, |bit| VarRole::Slack {
            of: SlackOf::Misclassification,
            bit,
        });
        let mut terms: Vec<(VarId, i64)> = flags.iter().map(|&f| (f, 1)).collect();
        terms.extend(slack.iter().enumerate().map(|(j, &s)| (s, -(1i64 << j))));
        self.cs.add(linear_eq_penalty(&terms, -1, "misclassification")?)?;
        self.derivations.push(Derivation::Slack {
            bits: slack,
            terms: flags.iter().map(|&f| (f, 1)).collect(),
            constant: -1,
        });
        self.flags = flags.clone();
        Ok(flags)
    }

    /// `sum(tau) <= budget` through binary slack; returns the constraint index.
    pub fn encode_budget(&mut self) -> Result<usize> {
        let taus: Vec<VarId> = self.tau.values().copied().collect();
        let budget = self.spec.budget() as i64;
        let (idx, bits) = self.cs.slack_encode_leq(&taus, budget, SlackOf::Budget, "budget")?;
        self.derivations.push(Derivation::Slack {
            bits,
            terms: taus.iter().map(|&t| (t, -1)).collect(),
            constant: budget,
        });
        Ok(idx)
    }

    /// `H_0 = sum(tau)`.
    pub fn objective(&self) -> QuadPoly {
        let mut p = QuadPoly::zero();
        for &v in self.tau.values() {
            p.add_linear(v, Coeff::from_integer(1));
        }
        p
    }

    pub fn finish(self, sample_id: Option<usize>) -> Result<EncodedInstance> {
        let weight = self.options.penalty_weight.resolve(self.spec.budget());
        let objective = self.objective();
        let num_constraints = self.cs.constraints().len();
        let qubo = self.cs.into_qubo(objective, weight)?;
        let meta = InstanceMeta {
            model_fingerprint: self.model.fingerprint(),
            sample_id,
            clean_label: self.label,
            perturbable: self.spec.perturbable().iter().copied().collect(),
            budget: self.spec.budget(),
            penalty_weight: crate::ir::coo::format_coeff(weight),
            tie_rule: self.options.tie_rule,
            num_vars: qubo.num_vars(),
            num_constraints,
        };
        log::info!(
            "encoded instance: {} variables, {} constraints, penalty weight {}",
            meta.num_vars,
            meta.num_constraints,
            meta.penalty_weight
        );
        Ok(EncodedInstance {
            qubo,
            tau_vars: self.tau,
            meta,
            input_width: self.model.input_width(),
            derivations: self.derivations,
        })
    }
}

/// Full encoding of one verification query.
pub fn build_verification_qubo(
    model: &BnnModel,
    sample: &BinarizedSample,
    spec: &PerturbationSpec,
    options: EncodeOptions,
) -> Result<EncodedInstance> {
    let predicted = model.predict(&sample.input)?;
    if predicted != sample.label {
        return Err(Error::CleanPredictionWrong {
            predicted,
            label: sample.label,
        });
    }
    let mut enc = Encoder::new(model, &sample.input, sample.label, spec, options)?;
    enc.encode_first_layer()?;
    for layer in 1..model.hidden_layer_count() {
        enc.encode_hidden_layer(layer)?;
    }
    enc.encode_output_layer()?;
    enc.encode_budget()?;
    enc.finish(None)
}
