//! Binary hyperdimensional classification with multi-task associative
//! memories.
//!
//! * [`hypervector`]: packed bipolar vectors, binding, bundling, Hamming
//!   distance, seeded and LFSR generation.
//! * [`encoding`]: item/level memories and record encoding of feature vectors.
//! * [`classifier`]: single-task associative memory training and inference.
//! * [`multitask`]: AM tables, baseline and task-projected compression,
//!   decomposition and footprint accounting.
//! * [`dataset`]: IDX parsing, normalization, task splits, synthetic data.
//! * [`harness`]: sequential multi-task experiments and result files.

pub mod classifier;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod harness;
pub mod hypervector;
pub mod multitask;

pub use error::{Error, Result};
pub use hypervector::{Accumulator, BundleCounter, HyperVector, LfsrStream, SeededRng};
pub use multitask::Method;
