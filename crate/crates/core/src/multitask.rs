//! Multi-task associative memories.
//!
//! Three ways to serve `s` sequentially trained tasks of `k` classes each:
//!
//! * **ideal**: keep every task's AM (the `s × k` AM table).
//! * **baseline**: bundle class `j` of every task into one shared `M_j`.
//! * **task-projected**: bind class `j` of task `i` with a random task key
//!   `P_i` before bundling, `M_j = [Σ_i C_i^j ⊕ P_i]`. Binding `M_j` with
//!   `P_m` again recovers `C_m^j` plus noise from the other tasks, which the
//!   near-orthogonal keys scatter away from every stored class vector.
//!
//! Both compressed forms hold `k` vectors regardless of `s`.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{nearest, AssociativeMemory};
use crate::error::{Error, Result};
use crate::hypervector::{Accumulator, HyperVector, LfsrStream, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "tp-hdc")]
    TaskProjected,
    #[serde(rename = "ideal")]
    Ideal,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Baseline, Method::TaskProjected, Method::Ideal];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::TaskProjected => "tp-hdc",
            Method::Ideal => "ideal",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" => Ok(Method::Baseline),
            "tp-hdc" | "tphdc" | "tp" => Ok(Method::TaskProjected),
            "ideal" => Ok(Method::Ideal),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Per-task associative memories in training order.
#[derive(Debug, Clone, Default)]
pub struct AmTable {
    tasks: Vec<AssociativeMemory>,
}

impl AmTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_memories(tasks: Vec<AssociativeMemory>) -> Result<Self> {
        let mut table = Self::new();
        for am in tasks {
            table.push(am)?;
        }
        Ok(table)
    }

    pub fn push(&mut self, am: AssociativeMemory) -> Result<()> {
        if let Some(first) = self.tasks.first() {
            if first.dim() != am.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: am.dim(),
                });
            }
        }
        self.tasks.push(am);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.tasks.first().map(AssociativeMemory::dim)
    }

    pub fn task(&self, i: usize) -> Result<&AssociativeMemory> {
        self.tasks.get(i).ok_or(Error::InvalidTask {
            task: i,
            tasks: self.tasks.len(),
        })
    }

    pub fn tasks(&self) -> &[AssociativeMemory] {
        &self.tasks
    }

    /// Shared class width `k = max k_i`.
    pub fn class_width(&self) -> usize {
        self.tasks
            .iter()
            .map(AssociativeMemory::class_count)
            .max()
            .unwrap_or(0)
    }
}

/// How task keys are produced; enough to regenerate them exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KeySource {
    /// Keys drawn in task order from one seeded stream.
    Random { seed: u64 },
    /// One LFSR per task sharing a feedback polynomial, each key the first
    /// `d` output bits from its initial state.
    Lfsr {
        polynomial: Vec<u32>,
        states: Vec<u64>,
    },
}

#[derive(Debug, Clone)]
pub struct TaskKeySet {
    source: KeySource,
    keys: Vec<HyperVector>,
}

impl TaskKeySet {
    pub fn generate(tasks: usize, dim: usize, source: KeySource) -> Result<Self> {
        if tasks == 0 {
            return Err(Error::NoTasks);
        }
        let keys = match &source {
            KeySource::Random { seed } => {
                let mut rng = SeededRng::new(*seed);
                (0..tasks)
                    .map(|_| HyperVector::random(dim, &mut rng))
                    .collect::<Result<Vec<_>>>()?
            }
            KeySource::Lfsr { polynomial, states } => {
                if states.len() != tasks {
                    return Err(Error::KeyCountMismatch {
                        tasks,
                        keys: states.len(),
                    });
                }
                states
                    .iter()
                    .map(|&state| {
                        let mut stream = LfsrStream::new(polynomial, state)?;
                        HyperVector::from_lfsr(dim, &mut stream)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(Self { source, keys })
    }

    pub fn source(&self) -> &KeySource {
        &self.source
    }

    pub fn keys(&self) -> &[HyperVector] {
        &self.keys
    }

    pub fn key(&self, task: usize) -> Result<&HyperVector> {
        self.keys.get(task).ok_or(Error::InvalidTask {
            task,
            tasks: self.keys.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Keys of the first `n` tasks. Random keys are drawn sequentially and
    /// LFSR keys per task, so the prefix equals `generate(n, ..)`.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.keys.len() {
            return Err(Error::InvalidTask {
                task: n,
                tasks: self.keys.len(),
            });
        }
        let source = match &self.source {
            KeySource::Random { seed } => KeySource::Random { seed: *seed },
            KeySource::Lfsr { polynomial, states } => KeySource::Lfsr {
                polynomial: polynomial.clone(),
                states: states[..n].to_vec(),
            },
        };
        Ok(Self {
            source,
            keys: self.keys[..n].to_vec(),
        })
    }
}

/// `generate_keys(s, d, source)`.
pub fn generate_keys(tasks: usize, dim: usize, source: KeySource) -> Result<TaskKeySet> {
    TaskKeySet::generate(tasks, dim, source)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compression {
    Baseline,
    TaskProjected,
}

impl Compression {
    fn as_str(self) -> &'static str {
        match self {
            Compression::Baseline => "baseline",
            Compression::TaskProjected => "tp-hdc",
        }
    }
}

/// `k` shared class vectors standing in for a whole AM table.
#[derive(Debug, Clone)]
pub struct CompressedAm {
    method: Compression,
    task_classes: Vec<usize>,
    classes: Vec<HyperVector>,
}

impl CompressedAm {
    pub fn method(&self) -> Compression {
        self.method
    }

    pub fn task_count(&self) -> usize {
        self.task_classes.len()
    }

    pub fn classes(&self) -> &[HyperVector] {
        &self.classes
    }

    fn check_task(&self, task: usize) -> Result<usize> {
        self.task_classes
            .get(task)
            .copied()
            .ok_or(Error::InvalidTask {
                task,
                tasks: self.task_classes.len(),
            })
    }
}

/// Bundles, per class index, one operand per task that has that class.
///
/// One tie vector is drawn from `rng` per composition and shared by every
/// class. Zero sums then resolve identically across classes, so tie filler
/// cannot by itself make one class look closer to a query than another.
fn compose(
    table: &AmTable,
    rng: &mut SeededRng,
    method: Compression,
    operand: impl Fn(usize, &HyperVector) -> Result<HyperVector>,
) -> Result<CompressedAm> {
    let dim = table.dim().ok_or(Error::EmptyTable)?;
    let width = table.class_width();
    let tie = HyperVector::random(dim, rng)?;
    let mut classes = Vec::with_capacity(width);
    for j in 0..width {
        let mut acc = Accumulator::new(dim)?;
        for (i, am) in table.tasks().iter().enumerate() {
            if let Some(c) = am.classes().get(j) {
                acc.add(&operand(i, c)?)?;
            }
        }
        classes.push(acc.binarize(&tie)?);
    }
    Ok(CompressedAm {
        method,
        task_classes: table.tasks().iter().map(|am| am.class_count()).collect(),
        classes,
    })
}

/// `M_j = [C_1^j + ... + C_s^j]`.
pub fn compose_baseline(table: &AmTable, rng: &mut SeededRng) -> Result<CompressedAm> {
    compose(table, rng, Compression::Baseline, |_, c| Ok(c.clone()))
}

/// `M_j = [C_1^j ⊕ P_1 + ... + C_s^j ⊕ P_s]`.
pub fn compose_tp(table: &AmTable, keys: &TaskKeySet, rng: &mut SeededRng) -> Result<CompressedAm> {
    if table.len() != keys.len() {
        return Err(Error::KeyCountMismatch {
            tasks: table.len(),
            keys: keys.len(),
        });
    }
    compose(table, rng, Compression::TaskProjected, |i, c| {
        c.bind(&keys.keys()[i])
    })
}

/// `Ĉ_j = M_j ⊕ P_m` for every stored class.
pub fn decompose(compressed: &CompressedAm, key: &HyperVector) -> Result<Vec<HyperVector>> {
    if compressed.method != Compression::TaskProjected {
        return Err(Error::MethodMismatch {
            expected: Compression::TaskProjected.as_str(),
            found: compressed.method.as_str(),
        });
    }
    compressed.classes.iter().map(|m| m.bind(key)).collect()
}

/// Stored state able to answer queries for any trained task.
#[derive(Debug, Clone, Copy)]
pub enum MultiTaskModel<'a> {
    Ideal(&'a AmTable),
    Baseline(&'a CompressedAm),
    TaskProjected {
        compressed: &'a CompressedAm,
        keys: &'a TaskKeySet,
    },
}

impl<'a> MultiTaskModel<'a> {
    pub fn method(&self) -> Method {
        match self {
            MultiTaskModel::Ideal(_) => Method::Ideal,
            MultiTaskModel::Baseline(_) => Method::Baseline,
            MultiTaskModel::TaskProjected { .. } => Method::TaskProjected,
        }
    }

    pub fn task_count(&self) -> usize {
        match self {
            MultiTaskModel::Ideal(table) => table.len(),
            MultiTaskModel::Baseline(c) => c.task_count(),
            MultiTaskModel::TaskProjected { compressed, .. } => compressed.task_count(),
        }
    }

    /// Class vectors used to answer queries of `task`, restricted to that
    /// task's own classes.
    pub fn class_vectors(&self, task: usize) -> Result<Cow<'a, [HyperVector]>> {
        match *self {
            MultiTaskModel::Ideal(table) => Ok(Cow::Borrowed(table.task(task)?.classes())),
            MultiTaskModel::Baseline(c) => {
                if c.method != Compression::Baseline {
                    return Err(Error::MethodMismatch {
                        expected: Compression::Baseline.as_str(),
                        found: c.method.as_str(),
                    });
                }
                let k = c.check_task(task)?;
                Ok(Cow::Borrowed(&c.classes[..k]))
            }
            MultiTaskModel::TaskProjected { compressed, keys } => {
                let k = compressed.check_task(task)?;
                let mut retrieved = decompose(compressed, keys.key(task)?)?;
                retrieved.truncate(k);
                Ok(Cow::Owned(retrieved))
            }
        }
    }

    pub fn classify(&self, task: usize, query: &HyperVector) -> Result<usize> {
        nearest(&self.class_vectors(task)?, query)
    }
}

/// `classify_mt`: prediction for `query` of task `task` under `model`.
pub fn classify_mt(model: &MultiTaskModel<'_>, task: usize, query: &HyperVector) -> Result<usize> {
    model.classify(task, query)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyStorage {
    /// Task keys kept in memory next to the class vectors.
    Stored,
    /// Task keys regenerated on demand from LFSR initial states.
    Regenerated,
}

/// Hypervectors a method must hold for `tasks` tasks of `classes` classes.
///
/// Task-projected storage is `k + s` with stored keys (tasks + classes) and
/// `k` when keys are regenerated from LFSR descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FootprintReport {
    pub method: Method,
    pub tasks: usize,
    pub classes: usize,
    pub key_storage: KeyStorage,
    pub class_vectors: usize,
    pub key_vectors: usize,
}

impl FootprintReport {
    pub fn total_vectors(&self) -> usize {
        self.class_vectors + self.key_vectors
    }
}

pub fn memory_footprint(
    method: Method,
    tasks: usize,
    classes: usize,
    key_storage: KeyStorage,
) -> FootprintReport {
    let (class_vectors, key_vectors) = match (method, key_storage) {
        (Method::Ideal, _) => (tasks * classes, 0),
        (Method::Baseline, _) => (classes, 0),
        (Method::TaskProjected, KeyStorage::Stored) => (classes, tasks),
        (Method::TaskProjected, KeyStorage::Regenerated) => (classes, 0),
    };
    FootprintReport {
        method,
        tasks,
        classes,
        key_storage,
        class_vectors,
        key_vectors,
    }
}
