//! Exact minimization by bucket elimination along a min-fill order.
//!
//! Cost is exponential in the induced width of the interaction graph rather
//! than in the variable count, which keeps small verification instances
//! (dozens of variables, but built from narrow gate chains) exactly solvable.

use std::collections::BTreeSet;
use std::time::Instant;

use super::{ScaledQubo, SolverResult};
use crate::ir::QuboInstance;
use crate::{Error, Result};

/// Default cap on the largest intermediate table scope.
pub const ELIMINATION_WIDTH_CAP: usize = 22;

struct Factor {
    scope: Vec<usize>,
    table: Vec<i64>,
}

struct Step {
    var: usize,
    scope: Vec<usize>,
    /// Minimizing value of `var` for each assignment of `scope`.
    choice: Vec<u8>,
}

/// Greedy min-fill order (ties by degree, then index) and its induced width.
pub fn elimination_order(q: &ScaledQubo) -> (Vec<usize>, usize) {
    let n = q.num_vars();
    let mut adj: Vec<BTreeSet<usize>> = (0..n).map(|i| q.neighbors(i).map(|(j, _)| j).collect()).collect();
    let mut alive: BTreeSet<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    let mut width = 0;
    while !alive.is_empty() {
        let fill = |v: usize| {
            let nb: Vec<usize> = adj[v].iter().copied().collect();
            let mut missing = 0;
            for (a, &x) in nb.iter().enumerate() {
                missing += nb[a + 1..].iter().filter(|y| !adj[x].contains(y)).count();
            }
            missing
        };
        let v = *alive
            .iter()
            .min_by_key(|&&v| (fill(v), adj[v].len(), v))
            .expect("nonempty");
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        width = width.max(nb.len());
        for &a in &nb {
            adj[a].remove(&v);
            for &b in &nb {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        adj[v].clear();
        alive.remove(&v);
        order.push(v);
    }
    (order, width)
}

fn eliminate(var: usize, factors: Vec<Factor>) -> (Factor, Step) {
    let mut scope: Vec<usize> = factors.iter().flat_map(|f| f.scope.iter().copied()).filter(|&u| u != var).collect();
    scope.sort_unstable();
    scope.dedup();
    // for each factor, the bit in the new scope feeding each of its positions
    // (None marks the eliminated variable)
    let layout: Vec<Vec<Option<usize>>> = factors
        .iter()
        .map(|f| {
            f.scope
                .iter()
                .map(|u| (*u != var).then(|| scope.binary_search(u).expect("in scope")))
                .collect()
        })
        .collect();
    let size = 1usize << scope.len();
    let mut table = Vec::with_capacity(size);
    let mut choice = Vec::with_capacity(size);
    for a in 0..size {
        let mut e = [0i64; 2];
        for (f, lay) in factors.iter().zip(&layout) {
            let mut idx = [0usize; 2];
            for (k, pos) in lay.iter().enumerate() {
                match pos {
                    Some(p) => {
                        let b = (a >> p) & 1;
                        idx[0] |= b << k;
                        idx[1] |= b << k;
                    }
                    None => idx[1] |= 1 << k,
                }
            }
            e[0] += f.table[idx[0]];
            e[1] += f.table[idx[1]];
        }
        let pick = (e[1] < e[0]) as u8;
        table.push(e[pick as usize]);
        choice.push(pick);
    }
    (
        Factor {
            scope: scope.clone(),
            table,
        },
        Step { var, scope, choice },
    )
}

/// Exact global minimum. Among minimizers the choice is deterministic
/// (each eliminated variable prefers 0 on ties) but not lexicographic.
pub fn exact_minimize(q: &QuboInstance, width_cap: usize) -> Result<SolverResult> {
    let start = Instant::now();
    let sq = ScaledQubo::new(q);
    let n = sq.num_vars();
    let (order, width) = elimination_order(&sq);
    if width > width_cap {
        return Err(Error::TooLarge {
            what: "elimination width",
            size: width,
            cap: width_cap,
        });
    }
    let mut factors: Vec<Option<Factor>> = Vec::new();
    let mut by_var: Vec<Vec<usize>> = vec![Vec::new(); n];
    let push = |f: Factor, factors: &mut Vec<Option<Factor>>, by_var: &mut Vec<Vec<usize>>| {
        for &u in &f.scope {
            by_var[u].push(factors.len());
        }
        factors.push(Some(f));
    };
    for i in 0..n {
        push(
            Factor {
                scope: vec![i],
                table: vec![0, sq.linear(i)],
            },
            &mut factors,
            &mut by_var,
        );
        for (j, c) in sq.neighbors(i).filter(|&(j, _)| j > i) {
            push(
                Factor {
                    scope: vec![i, j],
                    table: vec![0, 0, 0, c],
                },
                &mut factors,
                &mut by_var,
            );
        }
    }
    let mut steps = Vec::with_capacity(n);
    let mut samples = 0u64;
    for &v in &order {
        let bucket: Vec<Factor> = by_var[v].iter().filter_map(|&id| factors[id].take()).collect();
        let (f, step) = eliminate(v, bucket);
        samples += 2 * f.table.len() as u64;
        steps.push(step);
        push(f, &mut factors, &mut by_var);
    }
    let mut x = vec![0u8; n];
    for step in steps.iter().rev() {
        let idx = step
            .scope
            .iter()
            .enumerate()
            .map(|(k, &u)| (x[u] as usize) << k)
            .sum::<usize>();
        x[step.var] = step.choice[idx];
    }
    let mut r = SolverResult::single("exact_elimination", q, x, samples, sq.is_exact())?;
    r.wall_time = start.elapsed();
    Ok(r)
}
