use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0} (must be positive)")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("LFSR state is all zero within its {width}-bit register")]
    DegenerateLfsrState { width: u32 },

    #[error("invalid LFSR configuration: {0}")]
    InvalidLfsr(String),

    #[error("level memory needs at least 2 levels, got {0}")]
    InvalidLevelCount(usize),

    #[error("invalid value range: v_min ({v_min}) must be below v_max ({v_max})")]
    InvalidRange { v_min: f64, v_max: f64 },

    #[error("feature count mismatch: item memory holds {expected}, sample has {found}")]
    FeatureCountMismatch { expected: usize, found: usize },

    #[error("item memory needs at least one feature")]
    NoFeatures,

    #[error("associative memory needs at least 2 classes, got {0}")]
    InvalidClassCount(usize),

    #[error("label {label} outside class range 0..{classes}")]
    UnknownLabel { label: usize, classes: usize },

    #[error("class {class} has no training samples")]
    EmptyClass { class: usize },

    #[error("AM table is empty")]
    EmptyTable,

    #[error("task count mismatch: table has {tasks} tasks, key set has {keys} keys")]
    KeyCountMismatch { tasks: usize, keys: usize },

    #[error("at least one task is required")]
    NoTasks,

    #[error("task index {task} out of range for {tasks} stored tasks")]
    InvalidTask { task: usize, tasks: usize },

    #[error("method mismatch: operation needs {expected}, state holds {found}")]
    MethodMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("{path}: bad IDX magic {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}: truncated IDX file ({what})")]
    Truncated { path: PathBuf, what: String },

    #[error("IDX count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("task label sets overlap on labels {0:?}")]
    OverlappingLabels(Vec<u8>),

    #[error("task {0} has an empty label set")]
    EmptyLabelSet(usize),

    #[error("noise fraction {0} outside [0, 0.5)")]
    InvalidNoise(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("task {0} has not been trained yet")]
    UnseenTask(usize),

    #[error("task {0} has an empty test subset")]
    EmptyTestSet(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
