#![allow(dead_code)]

use std::path::PathBuf;

use bnn_qubo::bnn::{BinarizedSample, BnnModel, Dataset, SpinBit, WeightMatrix};
use bnn_qubo::ir::{QuadPoly, QuboInstance, VarId};
use bnn_qubo::Coeff;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn digits_model() -> BnnModel {
    BnnModel::load(fixture("digits-31x7x10.json")).unwrap()
}

pub fn digits_dataset() -> Dataset {
    Dataset::load_idx(
        fixture("digits5x5-images.idx3-ubyte"),
        fixture("digits5x5-labels.idx1-ubyte"),
        128,
    )
    .unwrap()
}

pub fn random_model(widths: &[usize], rng: &mut ChaCha8Rng) -> BnnModel {
    let layers = widths
        .windows(2)
        .map(|w| {
            let rows: Vec<Vec<i8>> = (0..w[1])
                .map(|_| (0..w[0]).map(|_| if rng.random() { 1 } else { -1 }).collect())
                .collect();
            WeightMatrix::from_rows(&rows).unwrap()
        })
        .collect();
    BnnModel::new(layers).unwrap()
}

pub fn random_input(width: usize, rng: &mut ChaCha8Rng) -> Vec<SpinBit> {
    (0..width).map(|_| if rng.random() { SpinBit::PLUS } else { SpinBit::MINUS }).collect()
}

/// A random toy network (7 inputs, hidden width 3, one or two hidden
/// layers, 2 to 4 classes) with a random input labelled by its prediction.
pub fn toy_case(rng: &mut ChaCha8Rng) -> (BnnModel, BinarizedSample) {
    let classes = rng.random_range(2..=4);
    let widths: Vec<usize> = if rng.random() {
        vec![7, 3, classes]
    } else {
        vec![7, 3, 3, classes]
    };
    let model = random_model(&widths, rng);
    let input = random_input(7, rng);
    let label = model.predict(&input).unwrap();
    (model, BinarizedSample { input, label })
}

pub fn flip(input: &[SpinBit], mask: &[u8]) -> Vec<SpinBit> {
    input
        .iter()
        .zip(mask)
        .map(|(&x, &t)| if t == 1 { x.flip() } else { x })
        .collect()
}

/// Smallest number of flips among `pixels` (at most `budget`) that changes
/// the prediction, by enumerating masks in order of size.
pub fn min_adversarial_flips(model: &BnnModel, sample: &BinarizedSample, pixels: &[usize], budget: usize) -> Option<usize> {
    let clean = model.predict(&sample.input).unwrap();
    let mut best = None;
    for subset in 0u64..1 << pixels.len() {
        let k = subset.count_ones() as usize;
        if k > budget || best.is_some_and(|b| k >= b) {
            continue;
        }
        let mut mask = vec![0u8; sample.input.len()];
        for (bit, &p) in pixels.iter().enumerate() {
            mask[p] = ((subset >> bit) & 1) as u8;
        }
        if model.predict(&flip(&sample.input, &mask)).unwrap() != clean {
            best = Some(k);
        }
    }
    best
}

/// Dense random QUBO with coefficients drawn from `[-5, 5]` in steps of 1/100.
pub fn random_qubo(n: usize, rng: &mut ChaCha8Rng) -> QuboInstance {
    let mut p = QuadPoly::zero();
    for i in 0..n {
        p.add_linear(VarId(i), Coeff::new(rng.random_range(-500..=500), 100));
        for j in i + 1..n {
            p.add_quadratic(VarId(i), VarId(j), Coeff::new(rng.random_range(-500..=500), 100));
        }
    }
    QuboInstance::from_poly(n, p).unwrap()
}

/// Dense random spin glass with fields and couplings in `[-1, 1]`, returned
/// in QUBO form.
pub fn random_ising_as_qubo(n: usize, rng: &mut ChaCha8Rng) -> QuboInstance {
    let mut couplings = std::collections::BTreeMap::new();
    for a in 0..n {
        for b in a + 1..n {
            couplings.insert((a, b), Coeff::new(rng.random_range(-100..=100), 100));
        }
    }
    let fields = (0..n).map(|_| Coeff::new(rng.random_range(-100..=100), 100)).collect();
    let ising = bnn_qubo::ir::IsingInstance::new(n, couplings, fields, Coeff::from_integer(0));
    QuboInstance::from_poly(n, ising.to_qubo_poly()).unwrap()
}
