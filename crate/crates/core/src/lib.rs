//! Phonocardiogram preprocessing, segmentation, feature extraction and
//! murmur-classification evaluation.

pub mod augment;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod knn;
pub mod pipeline;
pub mod preprocess;
pub mod segment;
pub mod synth;
pub mod util;

pub use error::{PcgError, Result};
