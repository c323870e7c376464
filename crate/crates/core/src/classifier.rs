//! Single-task associative memory: class-wise bundling and nearest-class
//! inference under Hamming distance.

use crate::encoding::EncodedSample;
use crate::error::{Error, Result};
use crate::hypervector::{Accumulator, HyperVector, SeededRng};

/// Running per-class sums during training.
#[derive(Debug, Clone)]
pub struct AmAccumulator {
    dim: usize,
    classes: Vec<Accumulator>,
}

impl AmAccumulator {
    pub fn new(classes: usize, dim: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidClassCount(classes));
        }
        let classes = (0..classes)
            .map(|_| Accumulator::new(dim))
            .collect::<Result<_>>()?;
        Ok(Self { dim, classes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, label: usize) -> &Accumulator {
        &self.classes[label]
    }

    /// Per-class number of samples bundled so far.
    pub fn samples_per_class(&self) -> Vec<u32> {
        self.classes.iter().map(Accumulator::n_added).collect()
    }

    pub fn train_step(&mut self, sample: &EncodedSample) -> Result<()> {
        let classes = self.classes.len();
        let acc = self
            .classes
            .get_mut(sample.label)
            .ok_or(Error::UnknownLabel {
                label: sample.label,
                classes,
            })?;
        acc.add(&sample.vector)
    }

    /// Binarizes every class, each with its own tie-break vector drawn from
    /// `rng` in class order. Fails on the first class without samples. The
    /// accumulator is untouched, so training may continue afterwards.
    pub fn finalize(&self, rng: &mut SeededRng) -> Result<AssociativeMemory> {
        if let Some(class) = self.classes.iter().position(Accumulator::is_empty) {
            return Err(Error::EmptyClass { class });
        }
        self.snapshot(rng)
    }

    /// Like [`finalize`](Self::finalize) but an empty class becomes its
    /// tie-break vector, i.e. a random vector carrying no class information.
    /// Used for mid-training checkpoints before every class has been drawn.
    pub fn snapshot(&self, rng: &mut SeededRng) -> Result<AssociativeMemory> {
        let classes = self
            .classes
            .iter()
            .map(|acc| {
                let tie = HyperVector::random(self.dim, rng)?;
                acc.binarize(&tie)
            })
            .collect::<Result<_>>()?;
        Ok(AssociativeMemory {
            dim: self.dim,
            classes,
        })
    }
}

/// One binarized hypervector per class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociativeMemory {
    dim: usize,
    classes: Vec<HyperVector>,
}

impl AssociativeMemory {
    pub fn from_vectors(classes: Vec<HyperVector>) -> Result<Self> {
        let dim = classes.first().ok_or(Error::InvalidClassCount(0))?.dim();
        if let Some(bad) = classes.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Self { dim, classes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[HyperVector] {
        &self.classes
    }

    pub fn class(&self, label: usize) -> &HyperVector {
        &self.classes[label]
    }

    pub fn classify(&self, query: &HyperVector) -> Result<usize> {
        nearest(&self.classes, query)
    }
}

/// Index of the vector nearest to `query`; ties go to the lowest index.
pub fn nearest(candidates: &[HyperVector], query: &HyperVector) -> Result<usize> {
    let first = candidates.first().ok_or(Error::InvalidClassCount(0))?;
    if first.dim() != query.dim() {
        return Err(Error::DimensionMismatch {
            expected: first.dim(),
            found: query.dim(),
        });
    }
    let mut best = (0, u32::MAX);
    for (j, c) in candidates.iter().enumerate() {
        let d = c.distance(query)?;
        if d < best.1 {
            best = (j, d);
        }
    }
    Ok(best.0)
}
