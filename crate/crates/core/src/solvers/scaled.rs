use num_traits::{ToPrimitive, Zero};

use crate::ir::{QuadPoly, QuboInstance};
use crate::Coeff;

/// Largest common denominator used before falling back to a fixed-point scale.
const MAX_SCALE: i128 = 1 << 40;
const FALLBACK_SCALE: i64 = 1 << 24;

/// Integer-valued copy of a QUBO, `scale` times the original, with a
/// symmetric sparse adjacency for O(degree) local-field updates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaledQubo {
    n: usize,
    scale: i64,
    exact: bool,
    constant: i64,
    linear: Vec<i64>,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<i64>,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl ScaledQubo {
    pub fn new(q: &QuboInstance) -> Self {
        Self::from_poly(q.num_vars(), q.coefficients())
    }

    pub fn from_poly(n: usize, poly: &QuadPoly) -> Self {
        let coeffs = std::iter::once(poly.constant())
            .chain(poly.linear().map(|(_, c)| c))
            .chain(poly.quadratic().map(|(_, c)| c));
        let mut lcm: Option<i128> = Some(1);
        for c in coeffs {
            lcm = lcm.and_then(|l| {
                let d = *c.denom() as i128;
                let next = l / gcd(l, d) * d;
                (next <= MAX_SCALE).then_some(next)
            });
        }
        let (scale, exact) = match lcm {
            Some(l) => (l as i64, true),
            None => {
                log::warn!("QUBO coefficients have no small common denominator; using fixed-point energies");
                (FALLBACK_SCALE, false)
            }
        };
        let s = Coeff::from_integer(scale);
        let to_int = |c: Coeff| -> i64 {
            let v = c * s;
            if exact {
                v.to_integer()
            } else {
                v.to_f64().map(f64::round).unwrap_or(0.0) as i64
            }
        };
        let mut linear = vec![0i64; n];
        for (v, c) in poly.linear() {
            linear[v.0] = to_int(c);
        }
        let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
        for ((a, b), c) in poly.quadratic() {
            let c = to_int(c);
            if c != 0 {
                adj[a.0].push((b.0, c));
                adj[b.0].push((a.0, c));
            }
        }
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in &mut adj {
            row.sort_unstable();
            row_start.push(cols.len());
            for &(j, c) in row.iter() {
                cols.push(j);
                vals.push(c);
            }
        }
        row_start.push(cols.len());
        ScaledQubo {
            n,
            scale,
            exact,
            constant: to_int(poly.constant()),
            linear,
            row_start,
            cols,
            vals,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    /// False when coefficients were rounded to a fixed-point grid.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn constant(&self) -> i64 {
        self.constant
    }

    pub fn linear(&self, i: usize) -> i64 {
        self.linear[i]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_start[i + 1] - self.row_start[i]
    }

    pub fn energy(&self, x: &[u8]) -> i64 {
        let mut e = self.constant;
        for i in 0..self.n {
            if x[i] == 1 {
                e += self.linear[i];
                e += self.neighbors(i).filter(|&(j, _)| j > i && x[j] == 1).map(|(_, c)| c).sum::<i64>();
            }
        }
        e
    }

    pub fn to_f64(&self, scaled_energy: i64) -> f64 {
        scaled_energy as f64 / self.scale as f64
    }

    /// `linear_i + sum_j q_ij x_j`: the energy change of raising `x_i` to one.
    pub fn local_fields(&self, x: &[u8]) -> Vec<i64> {
        (0..self.n)
            .map(|i| self.linear[i] + self.neighbors(i).filter(|&(j, _)| x[j] == 1).map(|(_, c)| c).sum::<i64>())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.linear.iter().all(|c| *c == 0) && self.vals.is_empty()
    }
}
