//! Free-energy-machine dynamics on continuous logits.
//!
//! Per restart, starting from `l ~ N(0, sigma^2)` with `m = v = 0`, each step
//! `t` of `n_step` computes
//!
//! ```text
//! p = sigmoid(l), s = round(p), u = J s
//! g = -c_grad (2u + h + l / beta_t) * p * (1 - p)
//! v = a_t v + (1 - a_t) g^2,   l = l - eta g / (sqrt(v) + 1e-8)
//! l = (1 - decay) l + mu m,    m = l
//! ```
//!
//! with `a_t = t / (n_step - 1)`, and finishes with `s = round(sigmoid(l))`.
//! States are `{0, 1}` and the energy is `-h.s - 1/2 s.J.s`.
//!
//! The listing above is [`FemGradient::Printed`]. Against that energy it
//! doubles the coupling field and pushes logits away from zero in
//! proportion to the temperature. The default [`FemGradient::FreeEnergy`]
//! instead uses the derivative of the mean-field free energy
//! `E - T S`, i.e. `g = -c_grad (u + h - l / beta_t) * p * (1 - p)`.

use std::time::Instant;

use num_traits::ToPrimitive;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::anneal::restart_rng;
use super::SolverResult;
use crate::ir::QuboInstance;
use crate::{Error, Result};

/// `{0,1}` coupling form of a QUBO: `h_i = -Q_ii`, `J_ij = J_ji = -Q_ij`
/// and `offset` the QUBO constant, so `energy(x) + offset` is the QUBO energy.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryIsing {
    h: Vec<f64>,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    offset: f64,
}

impl BinaryIsing {
    pub fn from_qubo(q: &QuboInstance) -> Self {
        let n = q.num_vars();
        let poly = q.coefficients();
        let f = |c: crate::Coeff| c.to_f64().unwrap_or(f64::NAN);
        let mut h = vec![0.0; n];
        for (v, c) in poly.linear() {
            h[v.0] = -f(c);
        }
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for ((a, b), c) in poly.quadratic() {
            adj[a.0].push((b.0, -f(c)));
            adj[b.0].push((a.0, -f(c)));
        }
        let mut row_start = vec![0];
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for row in &mut adj {
            row.sort_by_key(|&(j, _)| j);
            for &(j, c) in row.iter() {
                cols.push(j);
                vals.push(c);
            }
            row_start.push(cols.len());
        }
        BinaryIsing {
            h,
            row_start,
            cols,
            vals,
            offset: f(poly.constant()),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.h.len()
    }

    pub fn fields(&self) -> &[f64] {
        &self.h
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        let r = self.row_start[i]..self.row_start[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// `(J s)_i`.
    fn coupled(&self, s: &[u8], i: usize) -> f64 {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.vals[r])
            .filter(|(&j, _)| s[j] == 1)
            .map(|(_, &c)| c)
            .sum()
    }

    /// `-h.s - 1/2 s.J.s`, without the offset.
    pub fn energy(&self, s: &[u8]) -> f64 {
        (0..self.num_vars())
            .filter(|&i| s[i] == 1)
            .map(|i| -self.h[i] - 0.5 * self.coupled(s, i))
            .sum()
    }

    /// One restart; returns the final rounded state.
    pub fn run(&self, p: &FemParams, restart: usize) -> Vec<u8> {
        let n = self.num_vars();
        let mut rng = restart_rng(p.seed, restart);
        let normal = Normal::new(0.0, p.sigma).expect("validated sigma");
        let mut l: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let mut m = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut prob = vec![0.0; n];
        let mut s = vec![0u8; n];
        let (gain, entropy_sign) = match p.gradient {
            FemGradient::FreeEnergy => (1.0, -1.0),
            FemGradient::Printed => (2.0, 1.0),
        };
        for t in 0..p.n_step {
            let a = t as f64 / (p.n_step - 1) as f64;
            let temp = p.temperature(a);
            for i in 0..n {
                prob[i] = sigmoid(l[i]);
                s[i] = round_half_up(prob[i]);
            }
            for i in 0..n {
                let u = self.coupled(&s, i);
                let g = -p.c_grad * (gain * u + self.h[i] + entropy_sign * l[i] * temp) * prob[i] * (1.0 - prob[i]);
                v[i] = a * v[i] + (1.0 - a) * g * g;
                l[i] -= p.eta * g / (v[i].sqrt() + 1e-8);
                l[i] = (1.0 - p.decay) * l[i] + p.mu * m[i];
                m[i] = l[i];
            }
        }
        l.iter().map(|&x| round_half_up(sigmoid(x))).collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn round_half_up(p: f64) -> u8 {
    (p >= 0.5) as u8
}

/// Which logit gradient to follow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FemGradient {
    /// Descent on `E - T S` for the `{0,1}` energy.
    #[default]
    FreeEnergy,
    /// The reference listing's `2u + h + l / beta_t`.
    Printed,
}

/// Direction of the temperature interpolation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureOrder {
    /// `1/beta_t = (1 - a_t) T_init + a_t T_final`, cooling over the run.
    #[default]
    Cooling,
    /// `1/beta_t = (1 - a_t) T_final + a_t T_init` as printed in the
    /// reference pseudocode, which heats over the run.
    Printed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FemParams {
    pub seed: u64,
    pub restarts: usize,
    pub t_init: f64,
    pub t_final: f64,
    pub n_step: usize,
    pub eta: f64,
    pub mu: f64,
    pub decay: f64,
    pub c_grad: f64,
    pub sigma: f64,
    pub order: TemperatureOrder,
    pub gradient: FemGradient,
}

impl Default for FemParams {
    fn default() -> Self {
        FemParams {
            seed: 0,
            restarts: 32,
            t_init: 1.0,
            t_final: 0.01,
            n_step: 1000,
            eta: 0.1,
            mu: 0.0,
            decay: 0.0,
            c_grad: 1.0,
            sigma: 0.1,
            order: TemperatureOrder::Cooling,
            gradient: FemGradient::FreeEnergy,
        }
    }
}

impl FemParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_init >= self.t_final
            && self.t_final > 0.0
            && self.n_step >= 2
            && self.eta > 0.0
            && self.restarts >= 1
            && self.sigma >= 0.0
            && self.sigma.is_finite()
            && self.c_grad.is_finite()
            && self.mu.is_finite()
            && self.decay.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid FEM parameters {self:?}")))
        }
    }

    fn temperature(&self, a: f64) -> f64 {
        match self.order {
            TemperatureOrder::Cooling => (1.0 - a) * self.t_init + a * self.t_final,
            TemperatureOrder::Printed => (1.0 - a) * self.t_final + a * self.t_init,
        }
    }
}

pub fn fem_solve(q: &QuboInstance, p: &FemParams) -> Result<SolverResult> {
    p.validate()?;
    let start = Instant::now();
    let ising = BinaryIsing::from_qubo(q);
    let runs: Vec<Vec<u8>> = (0..p.restarts).into_par_iter().map(|r| ising.run(p, r)).collect();
    let samples = (p.restarts * p.n_step) as u64;
    let mut r = SolverResult::merge("fem", q, runs, samples, p.seed)?;
    r.wall_time = start.elapsed();
    Ok(r)
}

/// Cartesian grid over step size and temperature endpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FemGrid {
    pub eta: Vec<f64>,
    pub t_init: Vec<f64>,
    pub t_final: Vec<f64>,
}

impl FemGrid {
    /// Grid points in row-major order (eta outermost); axes left empty keep
    /// the base value. Points violating `t_init >= t_final` are skipped.
    pub fn points(&self, base: &FemParams) -> Vec<FemParams> {
        let axis = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let mut out = Vec::new();
        for &eta in &axis(&self.eta, base.eta) {
            for &t_init in &axis(&self.t_init, base.t_init) {
                for &t_final in &axis(&self.t_final, base.t_final) {
                    let p = FemParams {
                        eta,
                        t_init,
                        t_final,
                        ..*base
                    };
                    if p.validate().is_ok() {
                        out.push(p);
                    }
                }
            }
        }
        out
    }
}

/// Runs every grid point and keeps the one with the lowest exact energy,
/// the earliest point winning ties.
pub fn hyperparameter_search(q: &QuboInstance, base: &FemParams, grid: &FemGrid) -> Result<(FemParams, SolverResult)> {
    let points = grid.points(base);
    if points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut best: Option<(crate::Coeff, FemParams, SolverResult)> = None;
    for p in points {
        let r = fem_solve(q, &p)?;
        let e = q.evaluate(&r.best_assignment)?;
        log::debug!("grid point eta={} t_init={} t_final={}: energy {}", p.eta, p.t_init, p.t_final, r.best_energy);
        if best.as_ref().is_none_or(|(b, _, _)| e < *b) {
            best = Some((e, p, r));
        }
    }
    let (_, p, r) = best.expect("nonempty grid");
    Ok((p, r))
}
