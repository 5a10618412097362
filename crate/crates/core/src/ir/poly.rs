use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::Coeff;

/// Dense index of a Boolean variable inside one constraint system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// Quadratic pseudo-Boolean polynomial with exact coefficients.
///
/// Diagonal products are folded into the linear part (`q * q = q`) and zero
/// coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QuadPoly {
    constant: Coeff,
    linear: BTreeMap<VarId, Coeff>,
    quadratic: BTreeMap<(VarId, VarId), Coeff>,
}

fn bump<K: Ord + Copy>(map: &mut BTreeMap<K, Coeff>, key: K, c: Coeff) {
    if c.is_zero() {
        return;
    }
    let entry = map.entry(key).or_insert_with(Coeff::zero);
    *entry += c;
    if entry.is_zero() {
        map.remove(&key);
    }
}

impl QuadPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_constant(c: Coeff) -> Self {
        QuadPoly {
            constant: c,
            ..Self::default()
        }
    }

    pub fn constant(&self) -> Coeff {
        self.constant
    }

    pub fn linear(&self) -> impl Iterator<Item = (VarId, Coeff)> + '_ {
        self.linear.iter().map(|(&v, &c)| (v, c))
    }

    /// Off-diagonal terms keyed by `(low, high)` with `low < high`.
    pub fn quadratic(&self) -> impl Iterator<Item = ((VarId, VarId), Coeff)> + '_ {
        self.quadratic.iter().map(|(&k, &c)| (k, c))
    }

    pub fn linear_coeff(&self, v: VarId) -> Coeff {
        self.linear.get(&v).copied().unwrap_or_else(Coeff::zero)
    }

    pub fn quadratic_coeff(&self, a: VarId, b: VarId) -> Coeff {
        let key = if a < b { (a, b) } else { (b, a) };
        self.quadratic.get(&key).copied().unwrap_or_else(Coeff::zero)
    }

    pub fn num_linear(&self) -> usize {
        self.linear.len()
    }

    pub fn num_quadratic(&self) -> usize {
        self.quadratic.len()
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.linear.is_empty() && self.quadratic.is_empty()
    }

    pub fn add_constant(&mut self, c: Coeff) {
        self.constant += c;
    }

    pub fn add_linear(&mut self, v: VarId, c: Coeff) {
        bump(&mut self.linear, v, c);
    }

    pub fn add_quadratic(&mut self, a: VarId, b: VarId, c: Coeff) {
        if a == b {
            return self.add_linear(a, c);
        }
        let key = if a < b { (a, b) } else { (b, a) };
        bump(&mut self.quadratic, key, c);
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &QuadPoly, scale: Coeff) {
        if scale.is_zero() {
            return;
        }
        self.constant += other.constant * scale;
        for (&v, &c) in &other.linear {
            self.add_linear(v, c * scale);
        }
        for (&(a, b), &c) in &other.quadratic {
            self.add_quadratic(a, b, c * scale);
        }
    }

    /// Expands `(sum_i c_i q_i + constant)^2` using `q^2 = q`.
    pub fn square_of_linear(terms: &[(VarId, i64)], constant: i64) -> QuadPoly {
        let mut p = QuadPoly::from_constant(Coeff::from_integer(constant * constant));
        for (i, &(a, ca)) in terms.iter().enumerate() {
            p.add_linear(a, Coeff::from_integer(ca * ca + 2 * ca * constant));
            for &(b, cb) in &terms[i + 1..] {
                p.add_quadratic(a, b, Coeff::from_integer(2 * ca * cb));
            }
        }
        p
    }

    pub fn evaluate(&self, x: &[u8]) -> Coeff {
        let mut acc = self.constant;
        for (v, c) in &self.linear {
            if x[v.0] != 0 {
                acc += c;
            }
        }
        for ((a, b), c) in &self.quadratic {
            if x[a.0] != 0 && x[b.0] != 0 {
                acc += c;
            }
        }
        acc
    }

    /// Floating-point evaluation; exact when every coefficient is an integer below 2^53.
    pub fn evaluate_f64(&self, x: &[u8]) -> f64 {
        self.evaluate(x).to_f64().unwrap_or(f64::NAN)
    }

    pub fn variables(&self) -> BTreeSet<VarId> {
        let mut vars: BTreeSet<VarId> = self.linear.keys().copied().collect();
        for &(a, b) in self.quadratic.keys() {
            vars.insert(a);
            vars.insert(b);
        }
        vars
    }

    pub fn max_var(&self) -> Option<VarId> {
        let lin = self.linear.keys().next_back().copied();
        let quad = self.quadratic.keys().map(|&(_, b)| b).max();
        lin.max(quad)
    }
}
