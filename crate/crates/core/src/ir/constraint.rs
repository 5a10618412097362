use std::collections::BTreeMap;

use num_traits::Zero;

use super::poly::{QuadPoly, VarId};
use crate::bnn::is_mersenne_width;
use crate::{Coeff, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    GateBuffer,
    GateNot,
    LinearEq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    Buffer,
    Not,
}

/// A constraint together with its indicator polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    /// Local variables, in the order the constructor received them.
    pub vars: Vec<VarId>,
    pub poly: QuadPoly,
    pub label: String,
}

impl Constraint {
    pub fn penalty(&self, x: &[u8]) -> Coeff {
        self.poly.evaluate(x)
    }

    pub fn is_satisfied(&self, x: &[u8]) -> bool {
        self.penalty(x).is_zero()
    }
}

fn distinct(vars: &[VarId]) -> bool {
    let mut sorted = vars.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).all(|w| w[0] != w[1])
}

/// Buffer: `q_i + q_k - 2 q_i q_k`. Not: `1 - q_i - q_k + 2 q_i q_k`, the
/// tabulated NOT polynomial shifted by one so that it is zero when satisfied.
pub fn gate_penalty(kind: GateKind, input: VarId, output: VarId, label: impl Into<String>) -> Result<Constraint> {
    if input == output {
        return Err(Error::InvalidConstraint(format!("gate input and output are both {input}")));
    }
    let one = Coeff::from_integer(1);
    let mut poly = QuadPoly::zero();
    let (constraint_kind, sign) = match kind {
        GateKind::Buffer => (ConstraintKind::GateBuffer, one),
        GateKind::Not => {
            poly.add_constant(one);
            (ConstraintKind::GateNot, -one)
        }
    };
    poly.add_linear(input, sign);
    poly.add_linear(output, sign);
    poly.add_quadratic(input, output, -sign * 2);
    Ok(Constraint {
        kind: constraint_kind,
        vars: vec![input, output],
        poly,
        label: label.into(),
    })
}

/// Squared integer linear equality `(sum c_i q_i + constant)^2`.
///
/// Repeated variables are merged; zero coefficients dropped.
pub fn linear_eq_penalty(terms: &[(VarId, i64)], constant: i64, label: impl Into<String>) -> Result<Constraint> {
    let mut merged: BTreeMap<VarId, i64> = BTreeMap::new();
    let mut order = Vec::new();
    for &(v, c) in terms {
        if !merged.contains_key(&v) {
            order.push(v);
        }
        *merged.entry(v).or_default() += c;
    }
    let terms: Vec<(VarId, i64)> = order
        .iter()
        .map(|v| (*v, merged[v]))
        .filter(|&(_, c)| c != 0)
        .collect();
    if terms.is_empty() && constant != 0 {
        return Err(Error::UnsatisfiableConstant(constant));
    }
    Ok(Constraint {
        kind: ConstraintKind::LinearEq,
        vars: terms.iter().map(|&(v, _)| v).collect(),
        poly: QuadPoly::square_of_linear(&terms, constant),
        label: label.into(),
    })
}

/// Boolean sign of a sum of `2^N - 1` bits: `out` is the most significant
/// bit of the binary-encoded sum and `aux` holds the remaining `N - 1` bits.
pub fn signb_penalty(inputs: &[VarId], out: VarId, aux: &[VarId], label: impl Into<String>) -> Result<Constraint> {
    signb_penalty_folded(inputs, 0, inputs.len(), out, aux, label)
}

/// [`signb_penalty`] for a neuron where some of the `fan_in` summands are
/// known constants: `constant_ones` of them are fixed to one, the rest of the
/// non-variable summands to zero.
pub fn signb_penalty_folded(
    inputs: &[VarId],
    constant_ones: usize,
    fan_in: usize,
    out: VarId,
    aux: &[VarId],
    label: impl Into<String>,
) -> Result<Constraint> {
    if !is_mersenne_width(fan_in) {
        return Err(Error::InvalidConstraint(format!(
            "sign fan-in {fan_in} is not of the form 2^N - 1"
        )));
    }
    let n = (fan_in + 1).trailing_zeros() as usize;
    if aux.len() != n - 1 {
        return Err(Error::InvalidConstraint(format!(
            "fan-in {fan_in} needs {} auxiliary bits, got {}",
            n - 1,
            aux.len()
        )));
    }
    if inputs.len() + constant_ones > fan_in {
        return Err(Error::InvalidConstraint(format!(
            "{} variable and {constant_ones} constant summands exceed fan-in {fan_in}",
            inputs.len()
        )));
    }
    let mut all: Vec<VarId> = inputs.to_vec();
    all.push(out);
    all.extend_from_slice(aux);
    if !distinct(&all) {
        return Err(Error::InvalidConstraint("sign constraint reuses a variable".into()));
    }
    let mut terms: Vec<(VarId, i64)> = inputs.iter().map(|&v| (v, 1)).collect();
    terms.push((out, -(1i64 << (n - 1))));
    terms.extend(aux.iter().enumerate().map(|(i, &a)| (a, -(1i64 << i))));
    Ok(Constraint {
        kind: ConstraintKind::LinearEq,
        vars: all,
        poly: QuadPoly::square_of_linear(&terms, constant_ones as i64),
        label: label.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits_of(mask: usize, n: usize) -> Vec<u8> {
        (0..n).map(|i| ((mask >> i) & 1) as u8).collect()
    }

    fn ids(n: usize) -> Vec<VarId> {
        (0..n).map(VarId).collect()
    }

    /// Tabulated XOR / XNOR penalties kept as truth-table references: they
    /// vanish on valid rows, but can go negative elsewhere, which is why the
    /// encoder never emits them.
    fn xor_table(qi: i64, qj: i64, qk: i64) -> i64 {
        qi + qj - 2 * qi * qj - qk
    }

    fn xnor_table(qi: i64, qj: i64, qk: i64) -> i64 {
        1 - qi - qj + 2 * qi * qj - qk
    }

    #[test]
    fn tabulated_xor_xnor_vanish_on_valid_rows() {
        for m in 0..8 {
            let (qi, qj, qk) = ((m & 1) as i64, ((m >> 1) & 1) as i64, ((m >> 2) & 1) as i64);
            assert_eq!(xor_table(qi, qj, qk) == 0, qk == qi ^ qj);
            assert_eq!(xnor_table(qi, qj, qk) == 0, qk == 1 - (qi ^ qj));
        }
    }

    #[test]
    fn buffer_examples() {
        let g = gate_penalty(GateKind::Buffer, VarId(0), VarId(1), "b").unwrap();
        assert_eq!(g.penalty(&[0, 1]), Coeff::from_integer(1));
        assert_eq!(g.penalty(&[1, 1]), Coeff::from_integer(0));
        assert_eq!(g.penalty(&[0, 0]), Coeff::from_integer(0));
        assert_eq!(g.penalty(&[1, 0]), Coeff::from_integer(1));
    }

    #[test]
    fn not_examples() {
        let g = gate_penalty(GateKind::Not, VarId(0), VarId(1), "n").unwrap();
        assert_eq!(g.penalty(&[1, 0]), Coeff::from_integer(0));
        assert_eq!(g.penalty(&[0, 1]), Coeff::from_integer(0));
        assert_eq!(g.penalty(&[1, 1]), Coeff::from_integer(1));
        assert_eq!(g.penalty(&[0, 0]), Coeff::from_integer(1));
        // raw tabulated NOT polynomial is -1 on the satisfied rows
        let raw = |qi: i64, qk: i64| 2 * qi * qk - qi - qk;
        assert_eq!(raw(1, 0), -1);
        assert_eq!(raw(0, 1), -1);
    }

    #[test]
    fn same_variable_gate_rejected() {
        assert!(gate_penalty(GateKind::Not, VarId(3), VarId(3), "x").is_err());
    }

    #[test]
    fn signb_examples_n2() {
        // inputs q1..q3, out, aux
        let v = ids(5);
        let c = signb_penalty(&v[..3], v[3], &v[4..], "s").unwrap();
        assert_eq!(c.penalty(&[1, 1, 0, 1, 0]), Coeff::from_integer(0));
        assert_eq!(c.penalty(&[0, 0, 0, 0, 0]), Coeff::from_integer(0));
        assert_eq!(c.penalty(&[1, 0, 0, 1, 0]), Coeff::from_integer(1));
    }

    #[test]
    fn signb_zero_set_is_exactly_the_valid_encodings() {
        for n in 1..=3usize {
            let fan_in = (1 << n) - 1;
            let total = fan_in + 1 + (n - 1);
            let v = ids(total);
            let c = signb_penalty(&v[..fan_in], v[fan_in], &v[fan_in + 1..], "s").unwrap();
            for m in 0..1usize << total {
                let x = bits_of(m, total);
                let sum: usize = x[..fan_in].iter().map(|&b| b as usize).sum();
                let out = x[fan_in] as usize;
                let aux: usize = x[fan_in + 1..].iter().enumerate().map(|(i, &b)| (b as usize) << i).sum();
                let valid = sum == (out << (n - 1)) + aux;
                let p = c.penalty(&x);
                assert_eq!(p.is_zero(), valid);
                if valid {
                    // output bit is the sign of the equivalent spin sum
                    assert_eq!(out == 1, 2 * sum as i64 - fan_in as i64 > 0);
                } else {
                    assert!(p >= Coeff::from_integer(1));
                }
            }
        }
    }

    #[test]
    fn signb_cardinality_errors() {
        let v = ids(8);
        assert!(signb_penalty(&v[..4], v[4], &v[5..6], "s").is_err());
        assert!(signb_penalty(&v[..3], v[3], &v[4..6], "s").is_err());
        assert!(signb_penalty(&v[..3], v[2], &v[4..5], "s").is_err());
        assert!(signb_penalty_folded(&v[..3], 5, 7, v[3], &v[4..6], "s").is_err());
    }

    #[test]
    fn folded_sign_counts_constant_ones() {
        // 7 summands: 2 variables, 3 constant ones, 2 constant zeros
        let v = ids(5);
        let c = signb_penalty_folded(&v[..2], 3, 7, v[2], &v[3..5], "s").unwrap();
        // sum = 1 + 0 + 3 = 4 -> out = 1, aux = 0
        assert!(c.is_satisfied(&[1, 0, 1, 0, 0]));
        // sum = 0 + 3 = 3 -> out = 0, aux = 3
        assert!(c.is_satisfied(&[0, 0, 0, 1, 1]));
        assert!(!c.is_satisfied(&[0, 0, 1, 0, 0]));
    }

    #[test]
    fn linear_eq_examples() {
        let c = linear_eq_penalty(&[(VarId(0), 1), (VarId(1), 1)], -1, "one-hot").unwrap();
        assert_eq!(c.penalty(&[1, 0]), Coeff::from_integer(0));
        assert_eq!(c.penalty(&[0, 0]), Coeff::from_integer(1));
        assert_eq!(c.penalty(&[1, 1]), Coeff::from_integer(1));

        let empty = linear_eq_penalty(&[], 0, "empty").unwrap();
        assert!(empty.poly.is_zero());

        let c = linear_eq_penalty(&[(VarId(0), 3)], -3, "k").unwrap();
        assert_eq!(c.penalty(&[1]), Coeff::from_integer(0));
        assert_eq!(c.penalty(&[0]), Coeff::from_integer(9));

        assert!(matches!(
            linear_eq_penalty(&[], 2, "bad"),
            Err(Error::UnsatisfiableConstant(2))
        ));
        assert!(matches!(
            linear_eq_penalty(&[(VarId(0), 1), (VarId(0), -1)], 1, "cancels"),
            Err(Error::UnsatisfiableConstant(1))
        ));
    }
}
