use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ScaledQubo, SolverResult};
use crate::ir::QuboInstance;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSchedule {
    #[default]
    Geometric,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub seed: u64,
    pub restarts: usize,
    pub sweeps: usize,
    pub beta_initial: f64,
    pub beta_final: f64,
    pub schedule: BetaSchedule,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            seed: 0,
            restarts: 16,
            sweeps: 1000,
            beta_initial: 0.1,
            beta_final: 10.0,
            schedule: BetaSchedule::Geometric,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.restarts >= 1
            && self.sweeps >= 1
            && self.beta_initial > 0.0
            && self.beta_final >= self.beta_initial
            && self.beta_final.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid annealing parameters {self:?}")))
        }
    }

    /// Inverse temperature at sweep `t` of `sweeps`.
    pub fn beta(&self, t: usize) -> f64 {
        if self.sweeps == 1 {
            return self.beta_final;
        }
        let a = t as f64 / (self.sweeps - 1) as f64;
        match self.schedule {
            BetaSchedule::Geometric => self.beta_initial * (self.beta_final / self.beta_initial).powf(a),
            BetaSchedule::Linear => self.beta_initial + a * (self.beta_final - self.beta_initial),
        }
    }
}

/// Metropolis single-flip dynamics with maintained local fields.
pub struct Annealer<'a> {
    q: &'a ScaledQubo,
    rng: ChaCha8Rng,
    x: Vec<u8>,
    field: Vec<i64>,
    energy: i64,
    order: Vec<usize>,
    best: (i64, Vec<u8>),
}

impl<'a> Annealer<'a> {
    /// Random initial state drawn from `rng`.
    pub fn new(q: &'a ScaledQubo, mut rng: ChaCha8Rng) -> Self {
        let x: Vec<u8> = (0..q.num_vars()).map(|_| rng.random::<bool>() as u8).collect();
        let field = q.local_fields(&x);
        let energy = q.energy(&x);
        Annealer {
            q,
            rng,
            best: (energy, x.clone()),
            x,
            field,
            energy,
            order: (0..q.num_vars()).collect(),
        }
    }

    pub fn state(&self) -> &[u8] {
        &self.x
    }

    /// Scaled energy of the current state.
    pub fn energy(&self) -> i64 {
        self.energy
    }

    pub fn best(&self) -> (i64, &[u8]) {
        (self.best.0, &self.best.1)
    }

    /// Scaled energy change of flipping `i`.
    pub fn delta(&self, i: usize) -> i64 {
        if self.x[i] == 0 {
            self.field[i]
        } else {
            -self.field[i]
        }
    }

    pub fn flip(&mut self, i: usize) {
        let up = self.x[i] == 0;
        self.energy += self.delta(i);
        self.x[i] ^= 1;
        for (j, c) in self.q.neighbors(i) {
            self.field[j] += if up { c } else { -c };
        }
    }

    /// One pass proposing every variable once, in a fresh random order.
    pub fn sweep(&mut self, beta: f64) {
        self.order.shuffle(&mut self.rng);
        let inv_scale = 1.0 / self.q.scale() as f64;
        for k in 0..self.order.len() {
            let i = self.order[k];
            let d = self.delta(i);
            if d <= 0 || self.rng.random::<f64>() < (-beta * d as f64 * inv_scale).exp() {
                self.flip(i);
                if self.energy < self.best.0 {
                    self.best.0 = self.energy;
                    self.best.1.copy_from_slice(&self.x);
                }
            }
        }
    }
}

/// Restart `r` draws from stream `r` of the ChaCha generator keyed by `seed`.
pub(crate) fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

pub fn simulated_annealing(q: &QuboInstance, p: &SaParams) -> Result<SolverResult> {
    p.validate()?;
    let start = Instant::now();
    let sq = ScaledQubo::new(q);
    let runs: Vec<Vec<u8>> = (0..p.restarts)
        .into_par_iter()
        .map(|r| {
            let mut a = Annealer::new(&sq, restart_rng(p.seed, r));
            for t in 0..p.sweeps {
                a.sweep(p.beta(t));
            }
            a.best.1
        })
        .collect();
    let samples = (p.restarts * p.sweeps * q.num_vars()) as u64;
    let mut r = SolverResult::merge("simulated_annealing", q, runs, samples, p.seed)?;
    r.wall_time = start.elapsed();
    Ok(r)
}
