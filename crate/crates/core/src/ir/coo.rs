//! Plain-text coordinate format for QUBO and Ising instances.
//!
//! ```text
//! p qubo <num_vars> <num_nonzeros> <offset>
//! i j coeff        # 0-based, i <= j, linear terms on the diagonal
//! ```
//!
//! Entries are written in row-major order. Coefficients are integers or
//! exact fractions `n/d`; the reader also accepts decimal numbers. Lines
//! starting with `c` or `#` are comments.

use std::collections::BTreeMap;

use num_traits::Zero;

use super::ising::IsingInstance;
use super::poly::{QuadPoly, VarId};
use super::qubo::QuboInstance;
use crate::{Coeff, Error, Result};

pub fn format_coeff(c: Coeff) -> String {
    if c.is_integer() {
        c.to_integer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

pub fn parse_coeff(s: &str) -> Result<Coeff> {
    let bad = || Error::Format(format!("bad coefficient {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.parse().map_err(|_| bad())?;
        let d: i64 = d.parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Coeff::new(n, d));
    }
    if let Ok(i) = s.parse::<i64>() {
        return Ok(Coeff::from_integer(i));
    }
    let f: f64 = s.parse().map_err(|_| bad())?;
    Coeff::approximate_float(f).ok_or_else(bad)
}

fn write_entries(kind: &str, n: usize, offset: Coeff, mut entries: Vec<(usize, usize, Coeff)>) -> String {
    entries.sort_by_key(|&(i, j, _)| (i, j));
    let mut out = format!("p {kind} {n} {} {}\n", entries.len(), format_coeff(offset));
    for (i, j, c) in entries {
        out.push_str(&format!("{i} {j} {}\n", format_coeff(c)));
    }
    out
}

pub fn write_qubo(q: &QuboInstance) -> String {
    let poly = q.coefficients();
    let entries = poly
        .linear()
        .map(|(v, c)| (v.0, v.0, c))
        .chain(poly.quadratic().map(|((a, b), c)| (a.0, b.0, c)))
        .collect();
    write_entries("qubo", q.num_vars(), poly.constant(), entries)
}

pub fn write_ising(ising: &IsingInstance) -> String {
    let entries = ising
        .fields()
        .iter()
        .enumerate()
        .filter(|(_, h)| !h.is_zero())
        .map(|(i, &h)| (i, i, h))
        .chain(ising.couplings().map(|((i, j), c)| (i, j, c)))
        .collect();
    write_entries("ising", ising.num_vars(), ising.offset(), entries)
}

struct Parsed {
    n: usize,
    offset: Coeff,
    entries: Vec<(usize, usize, Coeff)>,
}

fn parse(text: &str, kind: &str) -> Result<Parsed> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(no, l)| (no + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('c') && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| Error::Format("empty COO file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != "p" || h[1] != kind {
        return Err(Error::Format(format!("expected `p {kind} <n> <nnz> <offset>`, got {header:?}")));
    }
    let n: usize = h[2].parse().map_err(|_| Error::Format(format!("bad variable count {:?}", h[2])))?;
    let nnz: usize = h[3].parse().map_err(|_| Error::Format(format!("bad entry count {:?}", h[3])))?;
    let offset = parse_coeff(h[4])?;
    let mut entries = Vec::with_capacity(nnz);
    for (no, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Format(format!("line {no}: expected `i j coeff`")));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("line {no}: bad index {s:?}")));
        let (i, j) = (idx(f[0])?, idx(f[1])?);
        if i > j || j >= n {
            return Err(Error::Format(format!("line {no}: entry ({i}, {j}) outside upper triangle of {n}")));
        }
        entries.push((i, j, parse_coeff(f[2])?));
    }
    if entries.len() != nnz {
        return Err(Error::Format(format!("header declares {nnz} entries, found {}", entries.len())));
    }
    Ok(Parsed { n, offset, entries })
}

pub fn read_qubo(text: &str) -> Result<QuboInstance> {
    let Parsed { n, offset, entries } = parse(text, "qubo")?;
    let mut poly = QuadPoly::from_constant(offset);
    for (i, j, c) in entries {
        poly.add_quadratic(VarId(i), VarId(j), c);
    }
    QuboInstance::from_poly(n, poly)
}

pub fn read_ising(text: &str) -> Result<IsingInstance> {
    let Parsed { n, offset, entries } = parse(text, "ising")?;
    let mut fields = vec![Coeff::zero(); n];
    let mut couplings = BTreeMap::new();
    for (i, j, c) in entries {
        if i == j {
            fields[i] += c;
        } else {
            *couplings.entry((i, j)).or_insert_with(Coeff::zero) += c;
        }
    }
    Ok(IsingInstance::new(n, couplings, fields, offset))
}
