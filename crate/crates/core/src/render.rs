//! Plain-text and PGM pictures of an input and its perturbation.
//!
//! Text symbols: `#` for `+1`, `.` for `-1`, `+` for a pixel flipped from
//! `-1` to `+1`, `x` for one flipped from `+1` to `-1`.

use std::fmt::Write;

use crate::bnn::{InputGeometry, SpinBit};
use crate::{Error, Result};

fn check(geometry: InputGeometry, input: &[SpinBit], mask: &[u8]) -> Result<()> {
    if input.len() < geometry.rows * geometry.cols {
        return Err(Error::Dimension {
            expected: geometry.rows * geometry.cols,
            got: input.len(),
        });
    }
    if mask.len() != input.len() {
        return Err(Error::Dimension {
            expected: input.len(),
            got: mask.len(),
        });
    }
    Ok(())
}

fn symbol(x: SpinBit, flipped: bool) -> char {
    match (x == SpinBit::PLUS, flipped) {
        (true, false) => '#',
        (false, false) => '.',
        (false, true) => '+',
        (true, true) => 'x',
    }
}

/// Original grid on the left, perturbed grid on the right.
pub fn render_text(
    geometry: InputGeometry,
    input: &[SpinBit],
    mask: &[u8],
    clean_label: usize,
    new_label: usize,
) -> Result<String> {
    check(geometry, input, mask)?;
    let width = 2 * geometry.cols - 1;
    let mut out = String::new();
    let left = format!("label {clean_label}");
    writeln!(out, "{left:<w$}   label {new_label}", w = width).unwrap();
    for r in 0..geometry.rows {
        let cells = |flips: bool| {
            (0..geometry.cols)
                .map(|c| {
                    let i = r * geometry.cols + c;
                    symbol(input[i], flips && mask[i] == 1).to_string()
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(out, "{}   {}", cells(false), cells(true)).unwrap();
    }
    Ok(out)
}

/// ASCII PGM (`P2`) of the perturbed input, each pixel drawn as a
/// `scale x scale` block: `+1` dark, `-1` light, flips at the extremes.
pub fn render_pgm(geometry: InputGeometry, input: &[SpinBit], mask: &[u8], scale: usize) -> Result<String> {
    check(geometry, input, mask)?;
    let scale = scale.max(1);
    let (w, h) = (geometry.cols * scale, geometry.rows * scale);
    let mut out = format!("P2\n{w} {h}\n255\n");
    for y in 0..h {
        let row: Vec<String> = (0..w)
            .map(|x| {
                let i = (y / scale) * geometry.cols + x / scale;
                let level = match symbol(input[i], mask[i] == 1) {
                    '#' => 64,
                    '.' => 192,
                    '+' => 0,
                    _ => 255,
                };
                level.to_string()
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}
