use std::time::Instant;

use super::{ScaledQubo, SolverResult};
use crate::ir::QuboInstance;
use crate::{Error, Result};

/// Default variable cap for exhaustive enumeration.
pub const BRUTE_FORCE_CAP: usize = 26;

/// Exhaustive Gray-code enumeration. Among minimizers the lexicographically
/// smallest assignment (comparing `x_0` first) wins.
pub fn brute_force(q: &QuboInstance, cap: usize) -> Result<SolverResult> {
    let n = q.num_vars();
    if n > cap {
        return Err(Error::TooLarge {
            what: "brute-force variable count",
            size: n,
            cap,
        });
    }
    if n > 63 {
        return Err(Error::TooLarge {
            what: "brute-force variable count",
            size: n,
            cap: 63,
        });
    }
    let start = Instant::now();
    let sq = ScaledQubo::new(q);
    let mut x = vec![0u8; n];
    let mut field = sq.local_fields(&x);
    let mut energy = sq.constant();
    let mut mask = 0u64;
    // lexicographic order on (x_0, x_1, ...) is numeric order on the bit-reversed mask
    let key = |m: u64| if n == 0 { 0 } else { m.reverse_bits() >> (64 - n) };
    let mut best = (energy, key(0), 0u64);
    for step in 1..1u64 << n {
        let i = step.trailing_zeros() as usize;
        let up = x[i] == 0;
        energy += if up { field[i] } else { -field[i] };
        x[i] ^= 1;
        mask ^= 1 << i;
        for (j, c) in sq.neighbors(i) {
            field[j] += if up { c } else { -c };
        }
        let cand = (energy, key(mask), mask);
        if cand < best {
            best = cand;
        }
    }
    let assignment = (0..n).map(|i| ((best.2 >> i) & 1) as u8).collect();
    let mut r = SolverResult::single("brute_force", q, assignment, 1u64 << n, sq.is_exact())?;
    r.wall_time = start.elapsed();
    Ok(r)
}
