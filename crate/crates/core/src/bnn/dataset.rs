use std::collections::HashMap;
use std::path::Path;

use super::idx::{read_idx_images, read_idx_labels};
use super::spin::{BoolBit, SpinBit};
use crate::{Error, Result};

/// One binarized, padded input with its label.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinarizedSample {
    pub input: Vec<SpinBit>,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub samples: Vec<BinarizedSample>,
    pub source: String,
    pub threshold: u8,
    /// Unpadded pixel count; positions at or beyond it are padding.
    pub active_width: usize,
}

impl Dataset {
    pub fn new(samples: Vec<BinarizedSample>, source: impl Into<String>, threshold: u8, active_width: usize) -> Result<Self> {
        if let Some(first) = samples.first() {
            let width = first.input.len();
            if let Some(bad) = samples.iter().find(|s| s.input.len() != width) {
                return Err(Error::Dimension {
                    expected: width,
                    got: bad.input.len(),
                });
            }
            if active_width > width {
                return Err(Error::Dimension {
                    expected: width,
                    got: active_width,
                });
            }
        }
        Ok(Dataset {
            samples,
            source: source.into(),
            threshold,
            active_width,
        })
    }

    pub fn input_width(&self) -> Option<usize> {
        self.samples.first().map(|s| s.input.len())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Builds a dataset from in-memory IDX image/label buffers.
    pub fn from_idx_bytes(images: &[u8], labels: &[u8], threshold: u8, source: &str) -> Result<Self> {
        let images = read_idx_images(images)?;
        let labels = read_idx_labels(labels)?;
        if images.count != labels.len() {
            return Err(Error::Format(format!(
                "{} images but {} labels",
                images.count,
                labels.len()
            )));
        }
        let samples = (0..images.count)
            .map(|i| {
                let bits = pad_input(&binarize_image(images.image(i), threshold));
                BinarizedSample {
                    input: bits.iter().map(|b| b.to_spin()).collect(),
                    label: labels[i] as usize,
                }
            })
            .collect();
        Dataset::new(samples, source, threshold, images.rows * images.cols)
    }

    pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>, threshold: u8) -> Result<Self> {
        let source = format!("{} + {}", images.as_ref().display(), labels.as_ref().display());
        Self::from_idx_bytes(&std::fs::read(images)?, &std::fs::read(labels)?, threshold, &source)
    }
}

/// `bit_i = 1` iff `gray_i >= threshold`.
pub fn binarize_image(gray: &[u8], threshold: u8) -> Vec<BoolBit> {
    gray.iter().map(|&g| BoolBit::from(g >= threshold)).collect()
}

/// Smallest `2^n - 1` (with `n >= 1`) that is at least `len`.
pub fn padded_width(len: usize) -> usize {
    (len + 1).next_power_of_two().max(2) - 1
}

/// Appends zero bits up to the next `2^n - 1` length.
pub fn pad_input(bits: &[BoolBit]) -> Vec<BoolBit> {
    let mut out = bits.to_vec();
    out.resize(padded_width(bits.len()), BoolBit::ZERO);
    out
}

/// Drops every input that appears with more than one label and collapses
/// exact duplicates to their first occurrence.
pub fn dedup_dataset(ds: &Dataset) -> Dataset {
    let mut labels: HashMap<&[SpinBit], Option<usize>> = HashMap::new();
    for s in &ds.samples {
        labels
            .entry(&s.input)
            .and_modify(|l| {
                if *l != Some(s.label) {
                    *l = None;
                }
            })
            .or_insert(Some(s.label));
    }
    let mut emitted = std::collections::HashSet::new();
    let samples = ds
        .samples
        .iter()
        .filter(|s| labels[s.input.as_slice()].is_some() && emitted.insert(s.input.as_slice()))
        .cloned()
        .collect();
    Dataset {
        samples,
        source: ds.source.clone(),
        threshold: ds.threshold,
        active_width: ds.active_width,
    }
}
