//! Sign-activation binary networks and the binarized data they consume.

mod dataset;
mod idx;
mod model;
mod spin;

pub use dataset::{binarize_image, dedup_dataset, pad_input, padded_width, BinarizedSample, Dataset};
pub use idx::{read_idx_images, read_idx_labels, IdxImages};
pub use model::{BnnModel, Forward, InputGeometry, WeightFile, WeightMatrix};
pub use spin::{is_mersenne_width, sgn_spin, BoolBit, SpinBit};
