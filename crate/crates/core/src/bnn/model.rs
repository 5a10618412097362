use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::spin::{is_mersenne_width, sgn_spin, SpinBit};
use crate::{Error, Result};

/// Dense row-major matrix of spins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<SpinBit>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<SpinBit>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidModel("weight matrix must be non-empty".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(WeightMatrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows of -1/+1 entries.
    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::InvalidModel("ragged weight matrix".into()));
            }
            for &v in row {
                data.push(SpinBit::new(v)?);
            }
        }
        WeightMatrix::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> SpinBit {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[SpinBit] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    fn to_nested(&self) -> Vec<Vec<i8>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|s| s.value()).collect())
            .collect()
    }

    /// Integer matrix-vector product `W v`.
    fn apply(&self, v: &[SpinBit]) -> Vec<i64> {
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .map(|(w, x)| (w.value() * x.value()) as i64)
                    .sum()
            })
            .collect()
    }
}

/// Image shape before flattening and padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputGeometry {
    pub rows: usize,
    pub cols: usize,
    pub pad_length: usize,
}

/// On-disk weight file layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightFile {
    pub version: u32,
    pub class_count: usize,
    pub layer_widths: Vec<usize>,
    pub layers: Vec<Vec<Vec<i8>>>,
    pub binarization_threshold: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_geometry: Option<InputGeometry>,
}

pub const WEIGHT_FILE_VERSION: u32 = 1;

/// A feed-forward network with spin weights, sign activations on every
/// hidden layer and an argmax over the final layer's integer scores.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BnnModel {
    layers: Vec<WeightMatrix>,
    widths: Vec<usize>,
    binarization_threshold: u8,
    geometry: Option<InputGeometry>,
}

/// Result of evaluating a model on one input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forward {
    pub label: usize,
    /// Hidden activations `y^1 .. y^L`.
    pub activations: Vec<Vec<SpinBit>>,
    pub scores: Vec<i64>,
}

impl BnnModel {
    pub fn new(layers: Vec<WeightMatrix>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::InvalidModel("model has no layers".into()));
        };
        let mut widths = vec![first.cols()];
        for (l, w) in layers.iter().enumerate() {
            let fan_in = *widths.last().unwrap();
            if w.cols() != fan_in {
                return Err(Error::InvalidModel(format!(
                    "layer {l} has {} columns but receives {fan_in} inputs",
                    w.cols()
                )));
            }
            // every layer feeds either a sign neuron or the argmax from a sign-layer output
            if !is_mersenne_width(fan_in) {
                return Err(Error::InvalidModel(format!(
                    "layer {l} fan-in {fan_in} is not of the form 2^n - 1"
                )));
            }
            widths.push(w.rows());
        }
        if *widths.last().unwrap() < 2 {
            return Err(Error::InvalidModel("need at least two output classes".into()));
        }
        Ok(BnnModel {
            layers,
            widths,
            binarization_threshold: 128,
            geometry: None,
        })
    }

    pub fn with_geometry(mut self, geometry: InputGeometry) -> Result<Self> {
        if geometry.pad_length != self.input_width() || geometry.rows * geometry.cols > geometry.pad_length {
            return Err(Error::InvalidModel(format!(
                "geometry {}x{} padded to {} does not fit input width {}",
                geometry.rows,
                geometry.cols,
                geometry.pad_length,
                self.input_width()
            )));
        }
        self.geometry = Some(geometry);
        Ok(self)
    }

    pub fn with_threshold(mut self, threshold: u8) -> Self {
        self.binarization_threshold = threshold;
        self
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn class_count(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.widths
    }

    /// Weight matrices `W^0 .. W^L`; the last one produces class scores.
    pub fn layers(&self) -> &[WeightMatrix] {
        &self.layers
    }

    pub fn hidden_layer_count(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn binarization_threshold(&self) -> u8 {
        self.binarization_threshold
    }

    pub fn geometry(&self) -> Option<InputGeometry> {
        self.geometry
    }

    /// Number of leading input positions that carry image pixels.
    /// Anything after is zero padding.
    pub fn active_input_width(&self) -> usize {
        self.geometry
            .map_or(self.input_width(), |g| g.rows * g.cols)
    }

    pub fn forward(&self, input: &[SpinBit]) -> Result<Forward> {
        if input.len() != self.input_width() {
            return Err(Error::Dimension {
                expected: self.input_width(),
                got: input.len(),
            });
        }
        let (hidden, output) = self.layers.split_at(self.layers.len() - 1);
        let mut activations = Vec::with_capacity(hidden.len());
        let mut current: Vec<SpinBit> = input.to_vec();
        for w in hidden {
            let next = w
                .apply(&current)
                .into_iter()
                .map(sgn_spin)
                .collect::<Result<Vec<_>>>()?;
            activations.push(next.clone());
            current = next;
        }
        let scores = output[0].apply(&current);
        Ok(Forward {
            label: argmax_lowest(&scores),
            activations,
            scores,
        })
    }

    pub fn predict(&self, input: &[SpinBit]) -> Result<usize> {
        self.forward(input).map(|f| f.label)
    }

    pub fn to_weight_file(&self) -> WeightFile {
        WeightFile {
            version: WEIGHT_FILE_VERSION,
            class_count: self.class_count(),
            layer_widths: self.widths.clone(),
            layers: self.layers.iter().map(WeightMatrix::to_nested).collect(),
            binarization_threshold: self.binarization_threshold,
            input_geometry: self.geometry,
        }
    }

    pub fn from_weight_file(file: &WeightFile) -> Result<Self> {
        if file.version != WEIGHT_FILE_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported weight file version {}",
                file.version
            )));
        }
        let layers = file
            .layers
            .iter()
            .map(|m| WeightMatrix::from_rows(m))
            .collect::<Result<Vec<_>>>()?;
        let mut model = BnnModel::new(layers)?.with_threshold(file.binarization_threshold);
        if model.widths != file.layer_widths {
            return Err(Error::InvalidModel(format!(
                "declared layer widths {:?} disagree with matrices {:?}",
                file.layer_widths, model.widths
            )));
        }
        if model.class_count() != file.class_count {
            return Err(Error::InvalidModel(format!(
                "declared class count {} but output layer has {} rows",
                file.class_count,
                model.class_count()
            )));
        }
        if let Some(g) = file.input_geometry {
            model = model.with_geometry(g)?;
        }
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_weight_file()).expect("weight file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightFile = serde_json::from_str(text)?;
        Self::from_weight_file(&file)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical weight file, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// Argmax with ties resolved to the lowest index.
fn argmax_lowest(scores: &[i64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
