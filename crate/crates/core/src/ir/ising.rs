use std::collections::BTreeMap;

use num_traits::Zero;

use super::poly::{QuadPoly, VarId};
use super::qubo::QuboInstance;
use crate::Coeff;

/// Spin-glass form over `s in {-1, +1}^n` with energy
/// `E(s) = -h.s - 1/2 s.J.s` (J symmetric, zero diagonal).
///
/// `energy(2x - 1) + offset` equals the QUBO energy of `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsingInstance {
    num_vars: usize,
    /// Upper-triangle couplings `J_ij`, `i < j`.
    couplings: BTreeMap<(usize, usize), Coeff>,
    fields: Vec<Coeff>,
    offset: Coeff,
}

impl IsingInstance {
    pub fn new(num_vars: usize, couplings: BTreeMap<(usize, usize), Coeff>, fields: Vec<Coeff>, offset: Coeff) -> Self {
        assert_eq!(fields.len(), num_vars);
        let couplings = couplings
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((i, j), c)| {
                assert!(i != j && i.max(j) < num_vars, "bad coupling ({i}, {j})");
                ((i.min(j), i.max(j)), c)
            })
            .collect();
        IsingInstance {
            num_vars,
            couplings,
            fields,
            offset,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn couplings(&self) -> impl Iterator<Item = ((usize, usize), Coeff)> + '_ {
        self.couplings.iter().map(|(&k, &c)| (k, c))
    }

    pub fn coupling(&self, i: usize, j: usize) -> Coeff {
        self.couplings
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or_else(Coeff::zero)
    }

    pub fn fields(&self) -> &[Coeff] {
        &self.fields
    }

    pub fn offset(&self) -> Coeff {
        self.offset
    }

    pub fn energy(&self, spins: &[i8]) -> Coeff {
        let mut e = Coeff::zero();
        for (h, &s) in self.fields.iter().zip(spins) {
            e -= h * Coeff::from_integer(s as i64);
        }
        for (&(i, j), c) in &self.couplings {
            e -= c * Coeff::from_integer((spins[i] * spins[j]) as i64);
        }
        e
    }

    /// `energy(2x - 1) + offset` as a polynomial in `x`.
    pub fn to_qubo_poly(&self) -> QuadPoly {
        let two = Coeff::from_integer(2);
        let mut p = QuadPoly::from_constant(self.offset);
        for (i, &h) in self.fields.iter().enumerate() {
            p.add_linear(VarId(i), -two * h);
            p.add_constant(h);
        }
        for (&(i, j), &c) in &self.couplings {
            p.add_quadratic(VarId(i), VarId(j), -two * two * c);
            p.add_linear(VarId(i), two * c);
            p.add_linear(VarId(j), two * c);
            p.add_constant(-c);
        }
        p
    }
}

/// Substitutes `x = (s + 1) / 2`.
pub fn qubo_to_ising(q: &QuboInstance) -> IsingInstance {
    let n = q.num_vars();
    let half = Coeff::new(1, 2);
    let quarter = Coeff::new(1, 4);
    let poly = q.coefficients();
    let mut fields = vec![Coeff::zero(); n];
    let mut couplings = BTreeMap::new();
    let mut offset = poly.constant();
    for (v, a) in poly.linear() {
        fields[v.0] -= a * half;
        offset += a * half;
    }
    for ((a, b), c) in poly.quadratic() {
        *couplings.entry((a.0, b.0)).or_insert_with(Coeff::zero) -= c * quarter;
        fields[a.0] -= c * quarter;
        fields[b.0] -= c * quarter;
        offset += c * quarter;
    }
    IsingInstance::new(n, couplings, fields, offset)
}
